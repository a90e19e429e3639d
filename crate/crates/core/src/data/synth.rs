use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::dataset::list_images;
use super::io::{load_image, resize_area, save_image};
use crate::error::{Error, Result};
use crate::spectral::{wiener_response, ImageSample, Real, SpectralTransform};

/// Artifact injected by [`synthesize_aliased_set`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SynthMode {
    /// Area downsampling by `factor` followed by `log2(factor)` stride-2
    /// upsampling stages. Each stage duplicates pixels and scales them by the
    /// uneven 2×2 tap pattern `[1 + imbalance, 1 − imbalance]` in each axis,
    /// the footprint of a transposed convolution whose kernel does not tile evenly.
    CheckerboardUpsample { factor: usize, imbalance: f64 },
    /// Radial low-pass with the denoising filter response at `alpha_bar`,
    /// frequency measured in cycles per image.
    HighfreqSuppress { alpha_bar: f64 },
}

impl SynthMode {
    pub fn checkerboard() -> Self {
        Self::CheckerboardUpsample {
            factor: 4,
            imbalance: 0.25,
        }
    }

    pub fn highfreq() -> Self {
        Self::HighfreqSuppress { alpha_bar: 0.99 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CheckerboardUpsample { .. } => "checkerboard_upsample",
            Self::HighfreqSuppress { .. } => "highfreq_suppress",
        }
    }

    pub fn apply<T: Real>(&self, img: &ImageSample<T>) -> Result<ImageSample<T>> {
        match *self {
            Self::CheckerboardUpsample { factor, imbalance } => checkerboard_upsample(img, factor, imbalance),
            Self::HighfreqSuppress { alpha_bar } => highfreq_suppress(img, alpha_bar),
        }
    }
}

impl FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkerboard_upsample" => Ok(Self::checkerboard()),
            "highfreq_suppress" => Ok(Self::highfreq()),
            other => Err(Error::invalid(format!("unknown synthesis mode {other:?}"))),
        }
    }
}

pub fn checkerboard_upsample<T: Real>(img: &ImageSample<T>, factor: usize, imbalance: f64) -> Result<ImageSample<T>> {
    if factor < 2 || !factor.is_power_of_two() {
        return Err(Error::invalid(format!("upsampling factor must be a power of two >= 2, got {factor}")));
    }
    if !(0.0..1.0).contains(&imbalance) {
        return Err(Error::invalid(format!("imbalance must lie in [0, 1), got {imbalance}")));
    }
    let (h, w, c) = img.dim();
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::invalid(format!("{h}x{w} is not divisible by {factor}")));
    }
    let x = img.cast::<f64>().into_pixels().mapv(|v| (v + 1.0) / 2.0);
    let mut y = resize_area(x.view(), h / factor, w / factor)?;
    let taps = [1.0 + imbalance, 1.0 - imbalance];
    while y.dim().0 < h {
        let (sh, sw, _) = y.dim();
        y = Array3::from_shape_fn((2 * sh, 2 * sw, c), |(i, j, ch)| y[[i / 2, j / 2, ch]] * taps[i % 2] * taps[j % 2]);
    }
    Ok(ImageSample::new_clamped(y.mapv(|v| 2.0 * v - 1.0))?.cast())
}

pub fn highfreq_suppress<T: Real>(img: &ImageSample<T>, alpha_bar: f64) -> Result<ImageSample<T>> {
    if !(alpha_bar > 0.0 && alpha_bar <= 1.0) {
        return Err(Error::invalid(format!("alpha_bar must lie in (0, 1], got {alpha_bar}")));
    }
    let (h, w, c) = img.dim();
    let x = img.cast::<f64>();
    let t = SpectralTransform::<f64>::new(h, w)?;
    let gain = Array2::from_shape_fn((h, w), |(i, j)| {
        let u = i as f64 - (h / 2) as f64;
        let v = j as f64 - (w / 2) as f64;
        wiener_response(alpha_bar, u.hypot(v))
    });
    let mut out = Array3::zeros((h, w, c));
    for ch in 0..c {
        let mut f = t.forward_centered(x.channel(ch));
        f.zip_mut_with(&gain, |z, g| *z *= *g);
        out.index_axis_mut(Axis(2), ch).assign(&t.inverse_centered(&f));
    }
    Ok(ImageSample::new_clamped(out)?.cast())
}

/// Applies `mode` to every image in `real_dir` and writes PNGs to `out_dir`.
/// Returns the number of images written; unreadable inputs are skipped.
pub fn synthesize_aliased_set(real_dir: &Path, mode: SynthMode, out_dir: &Path, size: usize) -> Result<usize> {
    let files = list_images(real_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = 0;
    for path in files {
        let img = match load_image(&path, size) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let out = mode.apply(&img)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        save_image(&out, &out_dir.join(format!("{stem}.png")))?;
        written += 1;
    }
    Ok(written)
}
