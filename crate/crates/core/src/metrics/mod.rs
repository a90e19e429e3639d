//! Set-level evaluation: averaged spectra, log frequency distance, Fréchet
//! distance and spectrum rendering.

mod fid;
mod render;
mod report;

pub use fid::{
    embed_images, embed_spectra, fid, FidAccumulator, FidStats, IdentityEmbedder, ImageEmbedder,
    RandomProjectionEmbedder,
};
pub use render::{colormap, render_spectrum_png, spectrum_rgb};
pub use report::{write_metrics_csv, MetricsRow};

use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    chessboard_integration, to_f64, ChessboardProfile, ImageSample, Layout, Real, SpectralTransform,
};

/// Channel-averaged spectrum of an image set.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedSpectrum {
    /// Mean of `ln(1 + |F|)` over samples and channels, min-max mapped to `[-1, 1]`.
    pub log_mag: Array2<f64>,
    /// Mean raw magnitude `|F|` over samples and channels.
    pub raw: Array2<f64>,
    pub count: usize,
}

impl AveragedSpectrum {
    pub fn dim(&self) -> (usize, usize) {
        self.log_mag.dim()
    }

    pub fn values(&self, mode: LfdMode) -> &Array2<f64> {
        match mode {
            LfdMode::Raw => &self.raw,
            LfdMode::Normalized => &self.log_mag,
        }
    }

    /// Chessboard profile of the mean raw magnitude, which equals the mean of
    /// the per-image profiles.
    pub fn chessboard(&self) -> Result<ChessboardProfile> {
        chessboard_integration(self.raw.view(), Layout::Centered)
    }
}

/// Streaming accumulator behind [`averaged_spectrum`].
pub struct SpectrumAverager {
    transform: SpectralTransform<f64>,
    log_sum: Array2<f64>,
    raw_sum: Array2<f64>,
    count: usize,
}

impl SpectrumAverager {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        Ok(Self {
            transform: SpectralTransform::new(h, w)?,
            log_sum: Array2::zeros((h, w)),
            raw_sum: Array2::zeros((h, w)),
            count: 0,
        })
    }

    pub fn push<T: Real>(&mut self, img: &ImageSample<T>) -> Result<()> {
        let (h, w, c) = img.dim();
        if (h, w) != self.transform.dims() {
            return Err(Error::shape(self.transform.dims(), (h, w)));
        }
        let inv_c = 1.0 / c as f64;
        for ch in 0..c {
            let plane = img.channel(ch).mapv(to_f64);
            let spec = self.transform.forward_centered(plane.view());
            Zip::from(&mut self.log_sum)
                .and(&mut self.raw_sum)
                .and(&spec)
                .for_each(|l, r, z| {
                    let m = z.norm();
                    *l += m.ln_1p() * inv_c;
                    *r += m * inv_c;
                });
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<AveragedSpectrum> {
        if self.count == 0 {
            return Err(Error::Empty("no images to average".into()));
        }
        let n = self.count as f64;
        let mean_log = self.log_sum / n;
        let lo = mean_log.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mean_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let log_mag = if span > 0.0 {
            mean_log.mapv(|v| (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0))
        } else {
            Array2::from_elem(mean_log.dim(), -1.0)
        };
        Ok(AveragedSpectrum {
            log_mag,
            raw: self.raw_sum / n,
            count: self.count,
        })
    }
}

pub fn averaged_spectrum<T: Real>(images: &[ImageSample<T>]) -> Result<AveragedSpectrum> {
    let first = images
        .first()
        .ok_or_else(|| Error::Empty("no images to average".into()))?;
    let mut acc = SpectrumAverager::new(first.height(), first.width())?;
    for img in images {
        acc.push(img)?;
    }
    acc.finish()
}

/// Which averaged spectrum the log frequency distance compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfdMode {
    /// Mean raw magnitudes.
    #[default]
    Raw,
    /// Normalized mean log magnitudes.
    Normalized,
}

impl FromStr for LfdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "normalized" => Ok(Self::Normalized),
            other => Err(Error::invalid(format!("unknown LFD mode {other:?}"))),
        }
    }
}

/// Log frequency distance `ln(mean((a − b)²) + 1)`.
pub fn lfd(real: &AveragedSpectrum, fake: &AveragedSpectrum, mode: LfdMode) -> Result<f64> {
    lfd_arrays(real.values(mode), fake.values(mode))
}

pub fn lfd_arrays(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(a.dim(), b.dim()));
    }
    let mse = Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + (x - y).powi(2)) / a.len() as f64;
    Ok(mse.ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn constant(h: usize, c: f32) -> ImageSample {
        ImageSample::new(Array3::from_elem((h, h, 1), c)).unwrap()
    }

    #[test]
    fn constants_average_to_dc_only() {
        let avg = averaged_spectrum(&[constant(8, 0.5), constant(8, -0.25)]).unwrap();
        // |DC| = |c|·64 for each image
        let dc_raw = 0.5 * (0.5 * 64.0 + 0.25 * 64.0);
        assert!((avg.raw[[4, 4]] - dc_raw).abs() < 1e-9);
        assert_eq!(avg.log_mag[[4, 4]], 1.0);
        let off_dc = avg.log_mag.indexed_iter().filter(|(ij, _)| *ij != (4, 4));
        for (_, &v) in off_dc {
            assert_eq!(v, -1.0);
        }
        assert_eq!(avg.count, 2);
    }

    #[test]
    fn constant_difference_closed_form() {
        let a = Array2::from_elem((4, 6), 0.3);
        let b = Array2::from_elem((4, 6), -0.2);
        assert!((lfd_arrays(&a, &b).unwrap() - (0.25f64 + 1.0).ln()).abs() < 1e-15);
        assert_eq!(lfd_arrays(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(averaged_spectrum::<f32>(&[]).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("raw".parse::<LfdMode>().unwrap(), LfdMode::Raw);
        assert!("log".parse::<LfdMode>().is_err());
    }
}
