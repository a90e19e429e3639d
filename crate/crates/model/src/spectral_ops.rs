//! Differentiable counterparts of the spectral routines: magnitude
//! denormalization, inverse DFT with a fixed phase, and ring pooling.

use candle_core::{DType, Device, Tensor};
use stig_core::spectral::{ring_cell_counts, ring_index, SpectrumRecord};

use crate::error::{Error, Result};

/// Inverse DFT of a centered spectrum as two complex matrix products,
/// `x = Re(A F Bᵀ) / (H·W)` with `A[n, u] = e^{2πi n (u − H/2) / H}`.
pub struct Reconstructor {
    h: usize,
    w: usize,
    ar: Tensor,
    ai: Tensor,
    btr: Tensor,
    bti: Tensor,
}

fn twiddles(n: usize, dtype: DType) -> Result<(Tensor, Tensor)> {
    let mut re = Vec::with_capacity(n * n);
    let mut im = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            // row is the spatial index, col the centered frequency index
            let k = col as i64 - (n / 2) as i64;
            let phase = 2.0 * std::f64::consts::PI * ((row as i64 * k).rem_euclid(n as i64)) as f64 / n as f64;
            re.push(phase.cos());
            im.push(phase.sin());
        }
    }
    let re = Tensor::from_vec(re, (n, n), &Device::Cpu)?.to_dtype(dtype)?;
    let im = Tensor::from_vec(im, (n, n), &Device::Cpu)?.to_dtype(dtype)?;
    Ok((re, im))
}

impl Reconstructor {
    pub fn new(h: usize, w: usize, dtype: DType) -> Result<Self> {
        let (ar, ai) = twiddles(h, dtype)?;
        let (br, bi) = twiddles(w, dtype)?;
        Ok(Self {
            h,
            w,
            ar,
            ai,
            btr: br.t()?.contiguous()?,
            bti: bi.t()?.contiguous()?,
        })
    }

    /// Image `(B, C, H, W)` from raw magnitude and the cosine/sine of the
    /// phase, clamped to `[-1, 1]`.
    pub fn reconstruct(&self, mag: &Tensor, cos: &Tensor, sin: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = mag.dims4()?;
        if (h, w) != (self.h, self.w) {
            return Err(Error::invalid(format!("expected {}x{}, got {h}x{w}", self.h, self.w)));
        }
        let fr = (mag * cos)?;
        let fi = (mag * sin)?;
        let p = (self.ar.broadcast_matmul(&fr)? - self.ai.broadcast_matmul(&fi)?)?;
        let q = (self.ar.broadcast_matmul(&fi)? + self.ai.broadcast_matmul(&fr)?)?;
        let x = (p.broadcast_matmul(&self.btr)? - q.broadcast_matmul(&self.bti)?)?;
        Ok((x / (h * w) as f64)?.clamp(-1.0, 1.0)?)
    }
}

/// Raw magnitude `exp(lo + (y + 1)/2 · span) − 1` from a normalized log
/// magnitude `y`, with per-sample, per-channel `lo` and `span` of shape `(B, C, 1, 1)`.
pub fn raw_magnitude(log_mag: &Tensor, lo: &Tensor, span: &Tensor) -> Result<Tensor> {
    let l = ((log_mag + 1.0)? * 0.5)?.broadcast_mul(span)?.broadcast_add(lo)?;
    Ok((l.exp()? - 1.0)?.relu()?)
}

/// Linear map from a flattened `H × W` map to per-ring means over the
/// square rings used by chessboard integration.
pub fn ring_mean_operator(h: usize, w: usize, dtype: DType) -> Result<Tensor> {
    let counts = ring_cell_counts(h, w);
    let rings = counts.len();
    let mut m = vec![0.0f64; h * w * rings];
    for i in 0..h {
        for j in 0..w {
            if let Some(k) = ring_index(h, w, i, j) {
                m[(i * w + j) * rings + k] = 1.0 / counts[k] as f64;
            }
        }
    }
    Ok(Tensor::from_vec(m, (h * w, rings), &Device::Cpu)?.to_dtype(dtype)?)
}

/// Spectral-discriminator input: channel-averaged `(y + 1)/2` pooled over
/// rings, shape `(B, M/2)`.
pub fn ring_profile(log_mag: &Tensor, operator: &Tensor) -> Result<Tensor> {
    let (b, _, h, w) = log_mag.dims4()?;
    let y = ((log_mag.mean_keepdim(1)? + 1.0)? * 0.5)?;
    Ok(y.reshape((b, h * w))?.matmul(operator)?)
}

/// Tensors describing a batch of spectra in `(B, C, H, W)` layout.
pub struct SpectrumBatch {
    pub log_mag: Tensor,
    pub cos: Tensor,
    pub sin: Tensor,
    /// `(B, C, 1, 1)` lower end of the log range.
    pub lo: Tensor,
    /// `(B, C, 1, 1)` width of the log range.
    pub span: Tensor,
}

impl SpectrumBatch {
    pub fn from_records(records: &[SpectrumRecord<f32>], dtype: DType) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::invalid("empty spectrum batch"))?;
        let (h, w, c) = first.dim();
        let b = records.len();
        let mut log_mag = Vec::with_capacity(b * c * h * w);
        let mut cos = Vec::with_capacity(b * c * h * w);
        let mut sin = Vec::with_capacity(b * c * h * w);
        let mut lo = Vec::with_capacity(b * c);
        let mut span = Vec::with_capacity(b * c);
        for r in records {
            if r.dim() != (h, w, c) {
                return Err(Error::invalid(format!("spectrum {:?} does not match {:?}", r.dim(), (h, w, c))));
            }
            let norm = r
                .norm()
                .ok_or_else(|| Error::invalid("spectrum record has no normalization metadata"))?;
            for ch in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        log_mag.push(r.log_mag()[[i, j, ch]]);
                        let p = r.phase()[[i, j, ch]];
                        cos.push(p.cos());
                        sin.push(p.sin());
                    }
                }
                lo.push(norm[ch].min);
                span.push(norm[ch].max - norm[ch].min);
            }
        }
        let dev = Device::Cpu;
        let t = |v: Vec<f32>, shape: (usize, usize, usize, usize)| -> Result<Tensor> {
            Ok(Tensor::from_vec(v, shape, &dev)?.to_dtype(dtype)?)
        };
        Ok(Self {
            log_mag: t(log_mag, (b, c, h, w))?,
            cos: t(cos, (b, c, h, w))?,
            sin: t(sin, (b, c, h, w))?,
            lo: t(lo, (b, c, 1, 1))?,
            span: t(span, (b, c, 1, 1))?,
        })
    }

    pub fn raw_magnitude(&self) -> Result<Tensor> {
        raw_magnitude(&self.log_mag, &self.lo, &self.span)
    }
}

/// `(B, C, H, W)` tensor back to `H × W × C` arrays.
pub fn tensor_to_arrays(t: &Tensor) -> Result<Vec<ndarray::Array3<f32>>> {
    let (b, c, h, w) = t.dims4()?;
    let flat: Vec<f32> = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
    Ok((0..b)
        .map(|n| {
            ndarray::Array3::from_shape_fn((h, w, c), |(i, j, ch)| flat[((n * c + ch) * h + i) * w + j])
        })
        .collect())
}

/// `H × W × C` images to a `(B, C, H, W)` tensor.
pub fn arrays_to_tensor(arrays: &[&ndarray::Array3<f32>], dtype: DType) -> Result<Tensor> {
    let first = arrays.first().ok_or_else(|| Error::invalid("empty batch"))?;
    let (h, w, c) = first.dim();
    let mut v = Vec::with_capacity(arrays.len() * c * h * w);
    for a in arrays {
        if a.dim() != (h, w, c) {
            return Err(Error::invalid("inconsistent image sizes in batch"));
        }
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    v.push(a[[i, j, ch]]);
                }
            }
        }
    }
    Ok(Tensor::from_vec(v, (arrays.len(), c, h, w), &Device::Cpu)?.to_dtype(dtype)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use stig_core::spectral::{to_image, to_spectrum};
    use stig_core::ImageSample;

    #[test]
    fn matrix_inverse_matches_fft_path() {
        let px = Array3::from_shape_fn((8, 6, 2), |(i, j, c)| ((i * 5 + j * 3 + c) % 7) as f32 / 7.0 - 0.5);
        let img = ImageSample::new(px).unwrap();
        let spec = to_spectrum(&img).unwrap();
        let batch = SpectrumBatch::from_records(std::slice::from_ref(&spec), DType::F64).unwrap();
        let rec = Reconstructor::new(8, 6, DType::F64).unwrap();
        let x = rec
            .reconstruct(&batch.raw_magnitude().unwrap(), &batch.cos, &batch.sin)
            .unwrap();
        let ours = &tensor_to_arrays(&x).unwrap()[0];
        let reference = to_image(&spec).unwrap();
        let err = (ours - reference.pixels()).iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(err < 1e-5, "err {err}");
    }

    #[test]
    fn ring_means_of_constant_map() {
        let op = ring_mean_operator(8, 8, DType::F64).unwrap();
        let x = Tensor::ones((1, 3, 8, 8), DType::F64, &Device::Cpu).unwrap();
        let p: Vec<Vec<f64>> = ring_profile(&x, &op).unwrap().to_vec2().unwrap();
        assert_eq!(p[0].len(), 4);
        assert!(p[0].iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
