use ndarray::ArrayView2;

use super::{to_f64, Real};
use crate::error::{Error, Result};

/// Where the DC bin of a magnitude array sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// DC at `(H/2, W/2)`.
    Centered,
    /// Raw DFT order, DC at `(0, 0)`.
    Standard,
}

/// Spectral energy accumulated over square rings of constant Chebyshev
/// distance from DC.
///
/// `ci[0]` is the DC magnitude and `ci[k]` the magnitude summed over the
/// ring `max(|u|, |v|) = k`, for `k < M/2` with `M = min(H, W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChessboardProfile {
    ci: Vec<f64>,
}

impl ChessboardProfile {
    pub fn from_values(ci: Vec<f64>) -> Self {
        Self { ci }
    }

    pub fn values(&self) -> &[f64] {
        &self.ci
    }

    pub fn len(&self) -> usize {
        self.ci.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ci.is_empty()
    }

    /// Square sums `A_k`, the running total of the ring values.
    pub fn cumulative(&self) -> Vec<f64> {
        self.ci
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    /// Magnitude covered by all rings, `A_{M/2-1}`.
    pub fn total(&self) -> f64 {
        self.ci.iter().sum()
    }

    /// `CI_k / mean(CI_{k-offset}, CI_{k+offset})`: how far ring `k` stands
    /// above its neighbourhood. Grid aliasing from 4× upsampling shows up as a
    /// ratio well above one at `k = H/4`.
    pub fn peak_ratio(&self, ring: usize, offset: usize) -> Result<f64> {
        if offset == 0 || ring < offset || ring + offset >= self.ci.len() {
            return Err(Error::invalid(format!(
                "ring {ring} ± {offset} outside profile of length {}",
                self.ci.len()
            )));
        }
        let base = 0.5 * (self.ci[ring - offset] + self.ci[ring + offset]);
        if base <= 0.0 {
            return Err(Error::invalid("peak ratio undefined for empty neighbourhood"));
        }
        Ok(self.ci[ring] / base)
    }

    /// Element-wise mean of equally long profiles.
    pub fn mean(profiles: &[ChessboardProfile]) -> Result<ChessboardProfile> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::Empty("no profiles to average".into()))?;
        let mut acc = vec![0.0; first.len()];
        for p in profiles {
            if p.len() != acc.len() {
                return Err(Error::shape(acc.len(), p.len()));
            }
            for (a, v) in acc.iter_mut().zip(&p.ci) {
                *a += v;
            }
        }
        let n = profiles.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(ChessboardProfile { ci: acc })
    }
}

/// Ring of cell `(i, j)` in a centered `h × w` array, if it is covered.
pub fn ring_index(h: usize, w: usize, i: usize, j: usize) -> Option<usize> {
    let u = (i as isize - (h / 2) as isize).unsigned_abs();
    let v = (j as isize - (w / 2) as isize).unsigned_abs();
    let k = u.max(v);
    (k < h.min(w) / 2).then_some(k)
}

/// Number of cells in each ring of a centered `h × w` array.
pub fn ring_cell_counts(h: usize, w: usize) -> Vec<usize> {
    let m = h.min(w) / 2;
    (0..m).map(|k| if k == 0 { 1 } else { 8 * k }).collect()
}

/// Chessboard integration of a centered magnitude spectrum.
///
/// Computes the square sums `A_k` from a summed-area table and differences
/// them, so it does not share code with a per-cell ring bucketing.
pub fn chessboard_integration<T: Real>(mag: ArrayView2<T>, layout: Layout) -> Result<ChessboardProfile> {
    if layout != Layout::Centered {
        return Err(Error::invalid("chessboard integration needs a centered spectrum"));
    }
    let (h, w) = mag.dim();
    if h == 0 || w == 0 || h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!("spectrum dimensions must be even, got {h}x{w}")));
    }
    // sat[i][j] = sum of mag[..i, ..j]
    let mut sat = vec![0.0f64; (h + 1) * (w + 1)];
    for i in 0..h {
        let mut row = 0.0;
        for j in 0..w {
            row += to_f64(mag[[i, j]]);
            sat[(i + 1) * (w + 1) + j + 1] = sat[i * (w + 1) + j + 1] + row;
        }
    }
    let rect = |r0: usize, r1: usize, c0: usize, c1: usize| {
        // inclusive bounds
        sat[(r1 + 1) * (w + 1) + c1 + 1] - sat[r0 * (w + 1) + c1 + 1] - sat[(r1 + 1) * (w + 1) + c0]
            + sat[r0 * (w + 1) + c0]
    };
    let (ch, cw) = (h / 2, w / 2);
    let rings = h.min(w) / 2;
    let mut ci = Vec::with_capacity(rings);
    let mut prev = 0.0;
    for k in 0..rings {
        let a_k = rect(ch - k, ch + k, cw - k, cw + k);
        ci.push(if k == 0 { a_k } else { a_k - prev });
        prev = a_k;
    }
    Ok(ChessboardProfile { ci })
}
