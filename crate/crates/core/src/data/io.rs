use std::path::Path;

use image::{DynamicImage, RgbImage};
use ndarray::{Array3, ArrayView3};

use crate::error::{Error, Result};
use crate::spectral::{from_f64, to_f64, ImageSample, Real};

/// Overlap weights of an area resampling from `n` cells to `m` cells.
fn area_weights(n: usize, m: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n as f64 / m as f64;
    (0..m)
        .map(|i| {
            let (a, b) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut taps = Vec::new();
            let mut k = a.floor() as usize;
            while (k as f64) < b && k < n {
                let overlap = (b.min((k + 1) as f64) - a.max(k as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((k, overlap / scale));
                }
                k += 1;
            }
            taps
        })
        .collect()
}

/// Area-weighted resize of an `H × W × C` array.
pub fn resize_area<T: Real>(a: ArrayView3<T>, out_h: usize, out_w: usize) -> Result<Array3<T>> {
    let (h, w, c) = a.dim();
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Err(Error::invalid(format!("cannot resize {h}x{w} to {out_h}x{out_w}")));
    }
    let rows = area_weights(h, out_h);
    let cols = area_weights(w, out_w);
    let mut tmp = Array3::<f64>::zeros((out_h, w, c));
    for (i, taps) in rows.iter().enumerate() {
        for &(k, wt) in taps {
            for j in 0..w {
                for ch in 0..c {
                    tmp[[i, j, ch]] += wt * to_f64(a[[k, j, ch]]);
                }
            }
        }
    }
    let mut out = Array3::<f64>::zeros((out_h, out_w, c));
    for i in 0..out_h {
        for (j, taps) in cols.iter().enumerate() {
            for &(k, wt) in taps {
                for ch in 0..c {
                    out[[i, j, ch]] += wt * tmp[[i, k, ch]];
                }
            }
        }
    }
    Ok(out.mapv(from_f64))
}

pub fn center_crop_square(img: &DynamicImage) -> DynamicImage {
    let (w, h) = (img.width(), img.height());
    let s = w.min(h);
    img.crop_imm((w - s) / 2, (h - s) / 2, s, s)
}

/// 8-bit RGB to `[-1, 1]` via `v / 127.5 − 1`, center cropped and area resized.
pub fn image_to_sample(img: &DynamicImage, size: usize) -> Result<ImageSample> {
    let rgb = center_crop_square(img).to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let raw = Array3::from_shape_fn((h, w, 3), |(i, j, c)| {
        rgb.get_pixel(j as u32, i as u32).0[c] as f64 / 127.5 - 1.0
    });
    let pixels = if (h, w) == (size, size) {
        raw
    } else {
        resize_area(raw.view(), size, size)?
    };
    ImageSample::new_clamped(pixels.mapv(|v| v as f32))
}

pub fn load_image(path: &Path, size: usize) -> Result<ImageSample> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    image_to_sample(&img, size)
}

/// Inverse of the ingestion map, rounding to the nearest 8-bit level.
pub fn sample_to_rgb8<T: Real>(img: &ImageSample<T>) -> Result<RgbImage> {
    let (h, w, c) = img.dim();
    if c != 3 && c != 1 {
        return Err(Error::invalid(format!("cannot encode {c} channels")));
    }
    let px = img.pixels();
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let get = |ch: usize| {
            let v = to_f64(px[[y as usize, x as usize, ch.min(c - 1)]]);
            ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
        };
        image::Rgb([get(0), get(1), get(2)])
    }))
}

pub fn save_image<T: Real>(img: &ImageSample<T>, path: &Path) -> Result<()> {
    sample_to_rgb8(img)?.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_endpoints() {
        let mut rgb = RgbImage::new(2, 2);
        rgb.put_pixel(0, 0, image::Rgb([255, 0, 255]));
        let s = image_to_sample(&DynamicImage::ImageRgb8(rgb), 2).unwrap();
        assert_eq!(s.pixels()[[0, 0, 0]], 1.0);
        assert_eq!(s.pixels()[[0, 0, 1]], -1.0);
        assert_eq!(s.pixels()[[1, 1, 2]], -1.0);
    }

    #[test]
    fn area_resize_preserves_mean_and_block_averages() {
        let a = Array3::from_shape_fn((4, 4, 1), |(i, j, _)| (i * 4 + j) as f64);
        let r = resize_area(a.view(), 2, 2).unwrap();
        assert_eq!(r[[0, 0, 0]], (0.0 + 1.0 + 4.0 + 5.0) / 4.0);
        let r3 = resize_area(a.view(), 3, 3).unwrap();
        let m3 = r3.sum() / 9.0;
        assert!((m3 - a.sum() / 16.0).abs() < 1e-12);
    }

    #[test]
    fn rgb8_round_trip() {
        let mut rgb = RgbImage::new(4, 4);
        for (x, y, p) in rgb.enumerate_pixels_mut() {
            *p = image::Rgb([(x * 60) as u8, (y * 70) as u8, 17]);
        }
        let s = image_to_sample(&DynamicImage::ImageRgb8(rgb.clone()), 4).unwrap();
        assert_eq!(sample_to_rgb8(&s).unwrap(), rgb);
    }

    #[test]
    fn crops_to_centre() {
        let img = DynamicImage::ImageRgb8(RgbImage::new(10, 4));
        let c = center_crop_square(&img);
        assert_eq!((c.width(), c.height()), (4, 4));
    }
}
