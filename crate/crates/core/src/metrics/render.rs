use std::path::Path;

use image::{Rgb, RgbImage};

use super::AveragedSpectrum;
use crate::error::{Error, Result};

/// Jet-style false colour for `t ∈ [0, 1]`: dark blue at 0, dark red at 1.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let ch = |centre: f64| ((1.5 - (4.0 * t - centre).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// False-colour rendering of the normalized averaged log spectrum.
pub fn spectrum_rgb(avg: &AveragedSpectrum) -> RgbImage {
    let (h, w) = avg.dim();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = avg.log_mag[[y as usize, x as usize]];
        Rgb(colormap((v + 1.0) / 2.0))
    })
}

pub fn render_spectrum_png(avg: &AveragedSpectrum, path: &Path) -> Result<()> {
    spectrum_rgb(avg).save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn colormap_ends() {
        assert_eq!(colormap(0.0), [0, 0, 128]);
        assert_eq!(colormap(1.0), [128, 0, 0]);
        assert_eq!(colormap(0.5), [128, 255, 128]);
    }

    #[test]
    fn uniform_minimum_is_uniform_cool() {
        let avg = AveragedSpectrum {
            log_mag: Array2::from_elem((4, 4), -1.0),
            raw: Array2::zeros((4, 4)),
            count: 1,
        };
        let img = spectrum_rgb(&avg);
        assert!(img.pixels().all(|p| p.0 == [0, 0, 128]));
    }
}
