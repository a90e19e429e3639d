use ndarray::{Array3, ArrayView3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::io::resize_area;
use crate::error::{Error, Result};
use crate::spectral::ImageSample;

/// Occluding-disk ("dead leaves") texture model. Radii follow a `r⁻³`
/// density, which gives the `1/f²` power falloff of natural photographs.
#[derive(Clone, Debug, PartialEq)]
pub struct DeadLeavesConfig {
    pub size: usize,
    /// Rendering is done at `size · supersample` and area-downsampled.
    pub supersample: usize,
    /// Radius bounds in output pixels.
    pub r_min: f64,
    pub r_max: f64,
    pub color_jitter: f64,
    /// Upper bound on drawn disks; uncovered pixels stay at 0 afterwards.
    pub max_leaves: usize,
}

impl Default for DeadLeavesConfig {
    fn default() -> Self {
        Self {
            size: 64,
            supersample: 4,
            r_min: 1.0,
            r_max: 40.0,
            color_jitter: 0.15,
            max_leaves: 500_000,
        }
    }
}

pub fn dead_leaves<R: Rng + ?Sized>(cfg: &DeadLeavesConfig, rng: &mut R) -> Result<ImageSample> {
    if cfg.size == 0 || cfg.size % 2 != 0 || cfg.supersample == 0 {
        return Err(Error::invalid("dead leaves size must be even and supersample positive"));
    }
    if !(cfg.r_min > 0.0 && cfg.r_min <= cfg.r_max) {
        return Err(Error::invalid("dead leaves radii must satisfy 0 < r_min <= r_max"));
    }
    let n = cfg.size * cfg.supersample;
    let s = cfg.supersample as f64;
    let (rmin, rmax) = (cfg.r_min * s, cfg.r_max * s);
    let (a, b) = (rmin.powi(-2), rmax.powi(-2));
    let jitter = Normal::new(0.0, cfg.color_jitter).map_err(|e| Error::invalid(e.to_string()))?;
    let mut img = Array3::<f64>::zeros((n, n, 3));
    let mut filled = vec![false; n * n];
    let mut remaining = n * n;
    let mut leaves = 0;
    while remaining > 0 && leaves < cfg.max_leaves {
        leaves += 1;
        let u: f64 = rng.random();
        let r = (a - u * (a - b)).powf(-0.5);
        let cy = rng.random_range(-r..n as f64 + r);
        let cx = rng.random_range(-r..n as f64 + r);
        let base = rng.random_range(-0.9..0.9);
        let col: [f64; 3] = std::array::from_fn(|_| (base + jitter.sample(rng)).clamp(-1.0, 1.0));
        let i0 = (cy - r).floor().max(0.0) as usize;
        let i1 = ((cy + r).ceil().max(0.0) as usize).min(n);
        let j0 = (cx - r).floor().max(0.0) as usize;
        let j1 = ((cx + r).ceil().max(0.0) as usize).min(n);
        for i in i0..i1 {
            let dy = i as f64 + 0.5 - cy;
            for j in j0..j1 {
                let dx = j as f64 + 0.5 - cx;
                let idx = i * n + j;
                if !filled[idx] && dy * dy + dx * dx <= r * r {
                    filled[idx] = true;
                    remaining -= 1;
                    for c in 0..3 {
                        img[[i, j, c]] = col[c];
                    }
                }
            }
        }
    }
    let small = if cfg.supersample == 1 {
        img
    } else {
        resize_area(ArrayView3::from(&img), cfg.size, cfg.size)?
    };
    ImageSample::new_clamped(small.mapv(|v| v as f32))
}
