use candle_core::{Tensor, Var, D};

use crate::error::Result;
use crate::params::ParamStore;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

pub struct Conv2d {
    weight: Var,
    bias: Var,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        ps: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        Ok(Self {
            weight: ps.normal(format!("{name}.weight"), (c_out, c_in, kernel, kernel), INIT_STD)?,
            bias: ps.zeros(format!("{name}.bias"), c_out)?,
            stride,
            padding,
        })
    }

    /// Same as [`Conv2d::new`] with all-zero weights.
    pub fn zeroed(ps: &mut ParamStore, name: &str, c_in: usize, c_out: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            weight: ps.zeros(format!("{name}.weight"), (c_out, c_in, kernel, kernel))?,
            bias: ps.zeros(format!("{name}.bias"), c_out)?,
            stride: 1,
            padding: kernel / 2,
        })
    }

    pub fn out_size(&self, n: usize) -> usize {
        let k = self.weight.dim(3).unwrap_or(1);
        (n + 2 * self.padding).saturating_sub(k) / self.stride + 1
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        let b = self.bias.reshape((1, (), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

pub struct Linear {
    weight: Var,
    bias: Var,
}

impl Linear {
    pub fn new(ps: &mut ParamStore, name: &str, n_in: usize, n_out: usize) -> Result<Self> {
        Ok(Self {
            weight: ps.normal(format!("{name}.weight"), (n_out, n_in), INIT_STD)?,
            bias: ps.zeros(format!("{name}.bias"), n_out)?,
        })
    }

    /// Applies to the last dimension of a tensor of any rank.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.broadcast_matmul(&self.weight.t()?)?;
        Ok(y.broadcast_add(&self.bias)?)
    }
}

pub struct LayerNorm {
    gamma: Var,
    beta: Var,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: ps.ones(format!("{name}.gamma"), dim)?,
            beta: ps.zeros(format!("{name}.beta"), dim)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mu = x.mean_keepdim(D::Minus1)?;
        let xc = x.broadcast_sub(&mu)?;
        let var = xc.sqr()?.mean_keepdim(D::Minus1)?;
        let y = xc.broadcast_div(&(var + 1e-5)?.sqrt()?)?;
        Ok(y.broadcast_mul(&self.gamma)?.broadcast_add(&self.beta)?)
    }
}

/// Per-sample, per-channel normalization over the spatial dimensions, no affine part.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let mu = x.mean_keepdim((2, 3))?;
    let xc = x.broadcast_sub(&mu)?;
    let var = xc.sqr()?.mean_keepdim((2, 3))?;
    Ok(xc.broadcast_div(&(var + 1e-5)?.sqrt()?)?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    let pos = x.relu()?;
    let tail = (x.abs()?.neg()?.exp()? + 1.0)?.log()?;
    Ok((pos + tail)?)
}

pub fn log_softmax(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let shifted = x.broadcast_sub(&max)?;
    let lse = shifted.exp()?.sum_keepdim(D::Minus1)?.log()?;
    Ok(shifted.broadcast_sub(&lse)?)
}

pub fn softmax(x: &Tensor) -> Result<Tensor> {
    Ok(log_softmax(x)?.exp()?)
}

/// Rows scaled to unit Euclidean norm along the last dimension.
pub fn l2_normalize(x: &Tensor) -> Result<Tensor> {
    let norm = x.sqr()?.sum_keepdim(D::Minus1)?.sqrt()?.maximum(1e-12)?;
    Ok(x.broadcast_div(&norm)?)
}
