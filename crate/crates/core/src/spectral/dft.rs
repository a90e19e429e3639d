use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{ImageSample, Real};
use crate::error::{Error, Result};

/// Per-channel range of `ln(1 + |F|)` used to map log magnitudes to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelRange<T> {
    pub min: T,
    pub max: T,
}

/// Magnitude/phase decomposition of an image spectrum.
///
/// `log_mag` holds `ln(1 + |F|)` mapped per channel onto `[-1, 1]` using the
/// stored [`ChannelRange`]s, so the raw magnitude can be restored exactly.
/// `phase` is `arg F` in `(-π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRecord<T: Real = f32> {
    log_mag: Array3<T>,
    phase: Array3<T>,
    norm: Option<Vec<ChannelRange<T>>>,
    centered: bool,
}

impl<T: Real> SpectrumRecord<T> {
    pub fn from_parts(
        log_mag: Array3<T>,
        phase: Array3<T>,
        norm: Option<Vec<ChannelRange<T>>>,
        centered: bool,
    ) -> Result<Self> {
        if log_mag.dim() != phase.dim() {
            return Err(Error::shape(log_mag.dim(), phase.dim()));
        }
        let (h, w, c) = log_mag.dim();
        if h % 2 != 0 || w % 2 != 0 || c == 0 {
            return Err(Error::invalid(format!("bad spectrum shape {h}x{w}x{c}")));
        }
        if let Some(n) = &norm {
            if n.len() != c {
                return Err(Error::shape(c, n.len()));
            }
            if n.iter().any(|r| !(r.min.is_finite() && r.max.is_finite()) || r.max < r.min) {
                return Err(Error::invalid("invalid normalization range"));
            }
        }
        if log_mag.iter().chain(phase.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrum contains non-finite values"));
        }
        Ok(Self {
            log_mag,
            phase,
            norm,
            centered,
        })
    }

    /// Same phase and normalization, new log magnitude (the refinement path).
    pub fn with_log_mag(&self, log_mag: Array3<T>) -> Result<Self> {
        if log_mag.dim() != self.log_mag.dim() {
            return Err(Error::shape(self.log_mag.dim(), log_mag.dim()));
        }
        let one = T::one();
        let log_mag = log_mag.mapv(|v| v.max(-one).min(one));
        Self::from_parts(log_mag, self.phase.clone(), self.norm.clone(), self.centered)
    }

    pub fn log_mag(&self) -> &Array3<T> {
        &self.log_mag
    }

    pub fn phase(&self) -> &Array3<T> {
        &self.phase
    }

    pub fn norm(&self) -> Option<&[ChannelRange<T>]> {
        self.norm.as_deref()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.log_mag.dim()
    }

    /// `ln(1 + |F|)` before normalization.
    pub fn log_raw(&self) -> Result<Array3<T>> {
        let norm = self
            .norm
            .as_ref()
            .ok_or_else(|| Error::invalid("spectrum record has no normalization metadata"))?;
        let mut out = self.log_mag.clone();
        let half = T::from_f64(0.5).unwrap();
        for (c, range) in norm.iter().enumerate() {
            let span = range.max - range.min;
            out.index_axis_mut(Axis(2), c)
                .mapv_inplace(|v| range.min + (v + T::one()) * half * span);
        }
        Ok(out)
    }

    /// Raw magnitude `|F|`, restored through the stored normalization.
    pub fn raw_magnitude(&self) -> Result<Array3<T>> {
        Ok(self.log_raw()?.mapv(|v| v.exp_m1().max(T::zero())))
    }

    /// Channel-averaged raw magnitude.
    pub fn mean_raw_magnitude(&self) -> Result<Array2<T>> {
        let raw = self.raw_magnitude()?;
        Ok(raw.mean_axis(Axis(2)).expect("at least one channel"))
    }
}

/// Reusable 2-D FFT plans for one image size.
pub struct SpectralTransform<T: Real> {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> SpectralTransform<T> {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || h % 2 != 0 || w % 2 != 0 {
            return Err(Error::invalid(format!(
                "spectral transform needs even positive dimensions, got {h}x{w}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            col_fwd: planner.plan_fft_forward(h),
            row_inv: planner.plan_fft_inverse(w),
            col_inv: planner.plan_fft_inverse(h),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    fn transform(&self, buf: &mut [Complex<T>], inverse: bool) {
        let (h, w) = (self.h, self.w);
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        rows.process(buf);
        let mut t = vec![Complex::new(T::zero(), T::zero()); h * w];
        for i in 0..h {
            for j in 0..w {
                t[j * h + i] = buf[i * w + j];
            }
        }
        cols.process(&mut t);
        for j in 0..w {
            for i in 0..h {
                buf[i * w + j] = t[j * h + i];
            }
        }
    }

    /// Unnormalized forward DFT of one plane, DC shifted to `(H/2, W/2)`.
    pub fn forward_centered(&self, plane: ArrayView2<T>) -> Array2<Complex<T>> {
        let (h, w) = (self.h, self.w);
        assert_eq!(plane.dim(), (h, w), "plane does not match transform size");
        let mut buf: Vec<Complex<T>> = plane.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, false);
        let mut out = Array2::from_elem((h, w), Complex::new(T::zero(), T::zero()));
        for i in 0..h {
            for j in 0..w {
                out[[(i + h / 2) % h, (j + w / 2) % w]] = buf[i * w + j];
            }
        }
        out
    }

    /// Inverse of [`Self::forward_centered`], returning the real part scaled by `1/(H·W)`.
    pub fn inverse_centered(&self, spectrum: &Array2<Complex<T>>) -> Array2<T> {
        let (h, w) = (self.h, self.w);
        assert_eq!(spectrum.dim(), (h, w), "spectrum does not match transform size");
        let mut buf = vec![Complex::new(T::zero(), T::zero()); h * w];
        for i in 0..h {
            for j in 0..w {
                buf[i * w + j] = spectrum[[(i + h / 2) % h, (j + w / 2) % w]];
            }
        }
        self.transform(&mut buf, true);
        let scale = T::one() / T::from_usize(h * w).unwrap();
        Array2::from_shape_fn((h, w), |(i, j)| buf[i * w + j].re * scale)
    }

    pub fn to_spectrum(&self, img: &ImageSample<T>) -> Result<SpectrumRecord<T>> {
        let (h, w, c) = img.dim();
        if (h, w) != (self.h, self.w) {
            return Err(Error::shape((self.h, self.w), (h, w)));
        }
        let mut log_mag = Array3::zeros((h, w, c));
        let mut phase = Array3::zeros((h, w, c));
        let mut norm = Vec::with_capacity(c);
        for ch in 0..c {
            let spec = self.forward_centered(img.channel(ch));
            let mut lo = T::infinity();
            let mut hi = T::neg_infinity();
            for ((i, j), z) in spec.indexed_iter() {
                let l = z.norm().ln_1p();
                lo = lo.min(l);
                hi = hi.max(l);
                log_mag[[i, j, ch]] = l;
                phase[[i, j, ch]] = z.arg();
            }
            let span = hi - lo;
            let two = T::from_f64(2.0).unwrap();
            let mut plane = log_mag.index_axis_mut(Axis(2), ch);
            if span > T::zero() {
                plane.mapv_inplace(|l| (two * (l - lo) / span - T::one()).max(-T::one()).min(T::one()));
            } else {
                // degenerate spectrum: every value denormalizes back to `lo`
                plane.fill(-T::one());
            }
            norm.push(ChannelRange { min: lo, max: hi });
        }
        SpectrumRecord::from_parts(log_mag, phase, Some(norm), true)
    }

    pub fn to_image(&self, spec: &SpectrumRecord<T>) -> Result<ImageSample<T>> {
        let (h, w, c) = spec.dim();
        if (h, w) != (self.h, self.w) {
            return Err(Error::shape((self.h, self.w), (h, w)));
        }
        let mag = spec.raw_magnitude()?;
        let mut pixels = Array3::zeros((h, w, c));
        for ch in 0..c {
            let mut f = Array2::from_shape_fn((h, w), |(i, j)| {
                Complex::from_polar(mag[[i, j, ch]], spec.phase[[i, j, ch]])
            });
            if !spec.centered {
                f = shift(&f);
            }
            let plane = self.inverse_centered(&f);
            pixels.index_axis_mut(Axis(2), ch).assign(&plane);
        }
        ImageSample::new_clamped(pixels)
    }
}

fn shift<V: Clone>(a: &Array2<V>) -> Array2<V> {
    let (h, w) = a.dim();
    Array2::from_shape_fn((h, w), |(i, j)| a[[(i + h / 2) % h, (j + w / 2) % w]].clone())
}

/// Per-channel centered DFT, log-scaled and normalized to `[-1, 1]`.
pub fn to_spectrum<T: Real>(img: &ImageSample<T>) -> Result<SpectrumRecord<T>> {
    SpectralTransform::new(img.height(), img.width())?.to_spectrum(img)
}

/// Inverts [`to_spectrum`]: denormalize, exponentiate, recombine with the phase,
/// inverse DFT, real part, clamp to `[-1, 1]`.
pub fn to_image<T: Real>(spec: &SpectrumRecord<T>) -> Result<ImageSample<T>> {
    let (h, w, _) = spec.dim();
    SpectralTransform::new(h, w)?.to_image(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn naive_dft_mag(img: &Array2<f64>) -> Array2<f64> {
        let (h, w) = img.dim();
        let mut out = Array2::zeros((h, w));
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for x in 0..h {
                    for y in 0..w {
                        let a = -2.0 * std::f64::consts::PI
                            * (u as f64 * x as f64 / h as f64 + v as f64 * y as f64 / w as f64);
                        acc += Complex::from_polar(img[[x, y]], a);
                    }
                }
                out[[(u + h / 2) % h, (v + w / 2) % w]] = acc.norm();
            }
        }
        out
    }

    #[test]
    fn constant_image_concentrates_in_dc() {
        let img = ImageSample::new(Array3::from_elem((8, 8, 1), 0.25f64)).unwrap();
        let spec = to_spectrum(&img).unwrap();
        let raw = spec.raw_magnitude().unwrap();
        assert!((raw[[4, 4, 0]] - 16.0).abs() < 1e-9);
        for ((i, j, _), &m) in raw.indexed_iter() {
            if (i, j) != (4, 4) {
                assert!(m.abs() < 1e-9, "off-DC bin ({i},{j}) = {m}");
            }
        }
    }

    #[test]
    fn ramp_matches_naive_dft() {
        let plane = Array2::from_shape_fn((4, 4), |(i, j)| (i * 4 + j) as f64 / 15.0 * 2.0 - 1.0);
        let img = ImageSample::new(plane.clone().insert_axis(Axis(2))).unwrap();
        let spec = to_spectrum(&img).unwrap();
        let raw = spec.raw_magnitude().unwrap();
        let oracle = naive_dft_mag(&plane);
        for ((i, j), &m) in oracle.indexed_iter() {
            assert!((raw[[i, j, 0]] - m).abs() < 1e-6, "bin ({i},{j}): {} vs {m}", raw[[i, j, 0]]);
        }
    }

    #[test]
    fn zero_magnitude_gives_zero_image() {
        let spec = SpectrumRecord::from_parts(
            Array3::from_elem((4, 6, 2), -1.0f64),
            Array3::from_elem((4, 6, 2), 0.3),
            Some(vec![ChannelRange { min: 0.0, max: 0.0 }; 2]),
            true,
        )
        .unwrap();
        let img = to_image(&spec).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_normalization_is_rejected() {
        let spec = SpectrumRecord::from_parts(
            Array3::<f32>::zeros((4, 4, 1)),
            Array3::zeros((4, 4, 1)),
            None,
            true,
        )
        .unwrap();
        assert!(matches!(to_image(&spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn odd_and_non_finite_inputs_are_rejected() {
        assert!(ImageSample::new(Array3::<f32>::zeros((5, 4, 1))).is_err());
        let mut p = Array3::<f32>::zeros((4, 4, 1));
        p[[1, 1, 0]] = f32::NAN;
        assert!(ImageSample::new(p).is_err());
    }

    #[test]
    fn round_trip_rectangular() {
        let pixels = Array3::from_shape_fn((6, 10, 3), |(i, j, c)| ((i * 7 + j * 3 + c * 5) % 11) as f64 / 5.5 - 1.0);
        let img = ImageSample::new(pixels).unwrap();
        let back = to_image(&to_spectrum(&img).unwrap()).unwrap();
        let err = (back.pixels() - img.pixels()).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        assert!(err < 1e-10, "max err {err}");
    }

    #[test]
    fn normalized_log_magnitude_spans_unit_interval() {
        let pixels = Array3::from_shape_fn((8, 8, 1), |(i, j, _)| ((i * j) % 5) as f32 / 2.5 - 1.0);
        let spec = to_spectrum(&ImageSample::new(pixels).unwrap()).unwrap();
        let lo = spec.log_mag().fold(f32::INFINITY, |a, &b| a.min(b));
        let hi = spec.log_mag().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        assert_eq!(lo, -1.0);
        assert_eq!(hi, 1.0);
    }
}
