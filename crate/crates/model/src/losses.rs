//! Training objectives. Tensor inputs are `(B, C, H, W)` unless noted.

use candle_core::{DType, Device, Tensor, D};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::log_softmax;
use crate::networks::FrequencyPatchSet;

/// Weights of the generator objective and loss hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Patch adversarial term.
    pub adv: f64,
    /// Patch-wise contrastive term.
    pub pcl: f64,
    /// SSIM reconstruction term.
    pub rec: f64,
    /// Spectral discriminator term.
    pub spec: f64,
    /// Low-frequency magnitude term.
    pub lf: f64,
    /// NCE temperature.
    pub tau: f64,
    /// Half width of the low-frequency window.
    pub sigma: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            adv: 3.0,
            pcl: 10.0,
            rec: 3.0,
            spec: 3.0,
            lf: 3.0,
            tau: 0.07,
            sigma: 8,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("adv", self.adv),
            ("pcl", self.pcl),
            ("rec", self.rec),
            ("spec", self.spec),
            ("lf", self.lf),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("weight {name} must be finite and non-negative, got {w}")));
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn all_zero(&self) -> bool {
        [self.adv, self.pcl, self.rec, self.spec, self.lf].iter().all(|&w| w == 0.0)
    }
}

/// Unweighted generator-side loss values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub adv: f64,
    pub pcl: f64,
    pub rec: f64,
    pub spec: f64,
    pub lf: f64,
}

/// Discriminator objectives, each optimized by its own network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorLosses {
    pub patch: f64,
    pub spectral: f64,
}

/// `λ1·adv + λ2·pcl + λ3·rec + λ4·spec + λ5·lf`; discriminator objectives pass through.
pub fn total_loss(
    c: &LossComponents,
    d: &DiscriminatorLosses,
    w: &LossWeights,
) -> Result<(f64, DiscriminatorLosses)> {
    w.validate()?;
    let g = w.adv * c.adv + w.pcl * c.pcl + w.rec * c.rec + w.spec * c.spec + w.lf * c.lf;
    Ok((g, *d))
}

fn non_empty(t: &Tensor, what: &str) -> Result<()> {
    if t.elem_count() == 0 {
        return Err(Error::invalid(format!("empty {what} batch")));
    }
    Ok(())
}

/// Least-squares discriminator objective `mean((r − 1)²) + mean(f²)`.
pub fn lsgan_discriminator(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    non_empty(real, "real score")?;
    non_empty(fake, "fake score")?;
    Ok(((real - 1.0)?.sqr()?.mean_all()? + fake.sqr()?.mean_all()?)?)
}

/// Least-squares generator objective `mean((f − 1)²)`.
pub fn lsgan_generator(fake: &Tensor) -> Result<Tensor> {
    non_empty(fake, "fake score")?;
    Ok((fake - 1.0)?.sqr()?.mean_all()?)
}

/// `(loss_D, loss_G)` over patch score maps.
pub fn adv_loss(real: &Tensor, fake: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((lsgan_discriminator(real, fake)?, lsgan_generator(fake)?))
}

/// `(loss_Ds, loss_G)` over spectral discriminator probabilities.
pub fn spec_loss(real: &Tensor, fake: &Tensor) -> Result<(Tensor, Tensor)> {
    adv_loss(real, fake)
}

/// Patch NCE: for every output patch, cross-entropy of the softmax over
/// similarities to all input patches of the same layer and sample, with the
/// same-location input patch as target. Averaged over patches, then layers.
pub fn pcl_loss(input: &FrequencyPatchSet, output: &FrequencyPatchSet, tau: f64) -> Result<Tensor> {
    if input.locations != output.locations {
        return Err(Error::invalid("input and output patches come from different locations"));
    }
    if input.layers.is_empty() || input.layers.len() != output.layers.len() {
        return Err(Error::invalid("patch sets have different layer counts"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    let mut per_layer = Vec::with_capacity(input.layers.len());
    for (f, q) in input.layers.iter().zip(&output.layers) {
        if f.dims() != q.dims() {
            return Err(Error::invalid(format!("patch shapes {:?} vs {:?}", f.dims(), q.dims())));
        }
        let (_, s, _) = f.dims3()?;
        if s < 2 {
            return Err(Error::invalid("contrastive loss needs at least two patches per layer"));
        }
        let logits = (q.matmul(&f.transpose(1, 2)?.contiguous()?)? / tau)?;
        let eye = Tensor::eye(s, f.dtype(), &Device::Cpu)?;
        let pos = log_softmax(&logits)?.broadcast_mul(&eye)?.sum(D::Minus1)?;
        per_layer.push(pos.mean_all()?.neg()?);
    }
    Ok(Tensor::stack(&per_layer, 0)?.mean_all()?)
}

/// Structural similarity settings. Pixel values span `range`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            range: 2.0,
        }
    }
}

fn gaussian_taps(cfg: &SsimConfig) -> Vec<f64> {
    let c = (cfg.window / 2) as f64;
    let g: Vec<f64> = (0..cfg.window)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * cfg.sigma * cfg.sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over all valid windows, channels and samples.
pub fn ssim(a: &Tensor, b: &Tensor, cfg: &SsimConfig) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(Error::invalid(format!("ssim shapes {:?} vs {:?}", a.dims(), b.dims())));
    }
    let (n, c, h, w) = a.dims4()?;
    if cfg.window == 0 || cfg.window % 2 == 0 || cfg.window > h || cfg.window > w {
        return Err(Error::invalid(format!("ssim window {} does not fit {h}x{w}", cfg.window)));
    }
    let taps = gaussian_taps(cfg);
    let k = cfg.window;
    let dev = Device::Cpu;
    let kv = Tensor::from_vec(taps.clone(), (1, 1, k, 1), &dev)?.to_dtype(a.dtype())?;
    let kh = Tensor::from_vec(taps, (1, 1, 1, k), &dev)?.to_dtype(a.dtype())?;
    let blur = |x: &Tensor| -> Result<Tensor> {
        let x = x.reshape((n * c, 1, h, w))?;
        Ok(x.conv2d(&kv, 0, 1, 1, 1)?.conv2d(&kh, 0, 1, 1, 1)?)
    };
    let c1 = (0.01 * cfg.range).powi(2);
    let c2 = (0.03 * cfg.range).powi(2);
    let mu_a = blur(a)?;
    let mu_b = blur(b)?;
    let mu_aa = mu_a.sqr()?;
    let mu_bb = mu_b.sqr()?;
    let mu_ab = (&mu_a * &mu_b)?;
    let s_aa = (blur(&a.sqr()?)? - &mu_aa)?;
    let s_bb = (blur(&b.sqr()?)? - &mu_bb)?;
    let s_ab = (blur(&(a * b)?)? - &mu_ab)?;
    let num = (((mu_ab * 2.0)? + c1)? * ((s_ab * 2.0)? + c2)?)?;
    let den = (((mu_aa + mu_bb)? + c1)? * ((s_aa + s_bb)? + c2)?)?;
    Ok((num / den)?.mean_all()?)
}

/// `1 − SSIM(input, refined)`.
pub fn rec_loss(input: &Tensor, refined: &Tensor, cfg: &SsimConfig) -> Result<Tensor> {
    Ok((ssim(input, refined, cfg)?.neg()? + 1.0)?)
}

/// Sum of squared raw-magnitude differences over the centered
/// `(2σ+1) × (2σ+1)` window and all channels, averaged over the batch.
pub fn lf_loss(mag_in: &Tensor, mag_out: &Tensor, sigma: usize) -> Result<Tensor> {
    if mag_in.dims() != mag_out.dims() {
        return Err(Error::invalid(format!("magnitude shapes {:?} vs {:?}", mag_in.dims(), mag_out.dims())));
    }
    let (b, _, h, w) = mag_in.dims4()?;
    if sigma >= h.min(w) / 2 {
        return Err(Error::invalid(format!("sigma {sigma} must be below {}", h.min(w) / 2)));
    }
    let win = |t: &Tensor| -> Result<Tensor> {
        Ok(t.narrow(2, h / 2 - sigma, 2 * sigma + 1)?.narrow(3, w / 2 - sigma, 2 * sigma + 1)?)
    };
    let d = (win(mag_in)? - win(mag_out)?)?;
    Ok((d.sqr()?.sum_all()? / b as f64)?)
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}
