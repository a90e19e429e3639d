//! Generator, patch discriminator, spectral discriminator and projection head.

use candle_core::{DType, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{instance_norm, l2_normalize, leaky_relu, sigmoid, Conv2d, Linear};
use crate::params::ParamStore;

/// Architecture of all four networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub channels: usize,
    /// Number of resolution levels of the nested U-Net.
    pub gen_depth: usize,
    pub gen_base: usize,
    /// Adds the input to a zero-initialized output branch, so an untrained
    /// generator is the identity.
    pub gen_residual: bool,
    pub disc_base: usize,
    /// Stride-2 layers of the patch discriminator.
    pub disc_downsample: usize,
    pub embed_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: 3,
            gen_depth: 4,
            gen_base: 32,
            gen_residual: false,
            disc_base: 64,
            disc_downsample: 3,
            embed_dim: 256,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self, image_size: usize) -> Result<()> {
        let n = image_size;
        if n == 0 || n % 2 != 0 {
            return Err(Error::invalid(format!("image_size must be even, got {n}")));
        }
        if self.channels == 0 || self.gen_depth == 0 || self.gen_base == 0 || self.disc_base == 0 || self.embed_dim == 0 {
            return Err(Error::invalid("network widths and depth must be positive"));
        }
        let scale = 1usize << (self.gen_depth - 1);
        if n % scale != 0 || n / scale < 2 {
            return Err(Error::invalid(format!(
                "image_size {n} cannot be halved {} times",
                self.gen_depth - 1
            )));
        }
        let mut s = n;
        for _ in 0..self.disc_downsample {
            s /= 2;
        }
        if s < 3 {
            return Err(Error::invalid("patch discriminator downsamples the image away"));
        }
        Ok(())
    }
}

/// Two conv3×3 → instance norm → LeakyReLU(0.2) stages.
struct Block {
    c1: Conv2d,
    c2: Conv2d,
}

impl Block {
    fn new(ps: &mut ParamStore, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        Ok(Self {
            c1: Conv2d::new(ps, &format!("{name}.c1"), c_in, c_out, 3, 1, 1)?,
            c2: Conv2d::new(ps, &format!("{name}.c2"), c_out, c_out, 3, 1, 1)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let x = leaky_relu(&instance_norm(&self.c1.forward(x)?)?, 0.2)?;
        leaky_relu(&instance_norm(&self.c2.forward(&x)?)?, 0.2)
    }
}

/// Nested U-Net over normalized log-magnitude spectra.
///
/// Node `X[i][j]` sits at resolution level `i`; `X[i][0]` is the encoder path
/// and `X[i][j]` for `j ≥ 1` merges all earlier nodes of level `i` with the
/// upsampled `X[i+1][j−1]`.
pub struct Generator {
    cfg: ModelConfig,
    image_size: usize,
    params: ParamStore,
    nodes: Vec<Vec<Block>>,
    out: Conv2d,
}

impl Generator {
    pub fn new(cfg: &ModelConfig, image_size: usize, dtype: DType, seed: u64) -> Result<Self> {
        cfg.validate(image_size)?;
        let mut ps = ParamStore::new(dtype, seed);
        let d = cfg.gen_depth;
        let ch: Vec<usize> = (0..d).map(|i| cfg.gen_base << i).collect();
        let mut nodes: Vec<Vec<Block>> = (0..d).map(|_| Vec::new()).collect();
        for i in 0..d {
            let c_in = if i == 0 { cfg.channels } else { ch[i - 1] };
            nodes[i].push(Block::new(&mut ps, &format!("x{i}_0"), c_in, ch[i])?);
        }
        for j in 1..d {
            for i in 0..d - j {
                let c_in = ch[i] * j + ch[i + 1];
                nodes[i].push(Block::new(&mut ps, &format!("x{i}_{j}"), c_in, ch[i])?);
            }
        }
        let out = if cfg.gen_residual {
            Conv2d::zeroed(&mut ps, "out", ch[0], cfg.channels, 1)?
        } else {
            Conv2d::new(&mut ps, "out", ch[0], cfg.channels, 1, 1, 0)?
        };
        Ok(Self {
            cfg: cfg.clone(),
            image_size,
            params: ps,
            nodes,
            out,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    /// Channel count of each encoder tap.
    pub fn tap_channels(&self) -> Vec<usize> {
        (0..self.cfg.gen_depth).map(|i| self.cfg.gen_base << i).collect()
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        let n = self.image_size;
        if (c, h, w) != (self.cfg.channels, n, n) {
            return Err(Error::invalid(format!(
                "generator expects {}x{n}x{n}, got {c}x{h}x{w}",
                self.cfg.channels
            )));
        }
        Ok(())
    }

    /// Encoder nodes `X[i][0]`, the taps used for patch extraction.
    pub fn encode(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check(x)?;
        let mut taps: Vec<Tensor> = Vec::with_capacity(self.cfg.gen_depth);
        for i in 0..self.cfg.gen_depth {
            let input = if i == 0 { x.clone() } else { taps[i - 1].avg_pool2d(2)? };
            taps.push(self.nodes[i][0].forward(&input)?);
        }
        Ok(taps)
    }

    /// Refined log magnitude in `[-1, 1]` and the encoder taps of the input.
    pub fn forward_with_taps(&self, x: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let taps = self.encode(x)?;
        let d = self.cfg.gen_depth;
        let mut grid: Vec<Vec<Tensor>> = taps.iter().map(|t| vec![t.clone()]).collect();
        for j in 1..d {
            for i in 0..d - j {
                let below = &grid[i + 1][j - 1];
                let (_, _, h, w) = grid[i][0].dims4()?;
                let mut parts: Vec<Tensor> = grid[i][..j].to_vec();
                parts.push(below.upsample_nearest2d(h, w)?);
                let merged = Tensor::cat(&parts, 1)?;
                let node = self.nodes[i][j].forward(&merged)?;
                grid[i].push(node);
            }
        }
        let head = self.out.forward(&grid[0][d - 1])?;
        let y = if self.cfg.gen_residual {
            (x + head.tanh()?)?.clamp(-1.0, 1.0)?
        } else {
            head.tanh()?
        };
        Ok((y, taps))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_with_taps(x)?.0)
    }
}

/// Convolutional discriminator emitting a map of unbounded patch scores.
pub struct PatchDiscriminator {
    params: ParamStore,
    layers: Vec<(Conv2d, bool)>,
    channels: usize,
}

impl PatchDiscriminator {
    pub fn new(cfg: &ModelConfig, image_size: usize, dtype: DType, seed: u64) -> Result<Self> {
        cfg.validate(image_size)?;
        let mut ps = ParamStore::new(dtype, seed);
        let nf = cfg.disc_base;
        let mut layers = Vec::new();
        let mut c = cfg.channels;
        for l in 0..cfg.disc_downsample {
            let out = nf << l.min(3);
            layers.push((Conv2d::new(&mut ps, &format!("down{l}"), c, out, 4, 2, 1)?, l > 0));
            c = out;
        }
        let out = nf << cfg.disc_downsample.min(3);
        layers.push((Conv2d::new(&mut ps, "mid", c, out, 4, 1, 1)?, true));
        layers.push((Conv2d::new(&mut ps, "score", out, 1, 4, 1, 1)?, false));
        Ok(Self {
            params: ps,
            layers,
            channels: cfg.channels,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Spatial size of the score map for an `n × n` input.
    pub fn output_size(&self, n: usize) -> usize {
        self.layers.iter().fold(n, |s, (c, _)| c.out_size(s))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.channels {
            return Err(Error::invalid(format!("discriminator expects {} channels, got {c}", self.channels)));
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, (conv, norm)) in self.layers.iter().enumerate() {
            h = conv.forward(&h)?;
            if *norm {
                h = instance_norm(&h)?;
            }
            if i < last {
                h = leaky_relu(&h, 0.2)?;
            }
        }
        Ok(h)
    }
}

/// One fully connected layer with a sigmoid over a ring profile.
pub struct SpectralDiscriminator {
    params: ParamStore,
    fc: Linear,
    len: usize,
}

impl SpectralDiscriminator {
    pub fn new(profile_len: usize, dtype: DType, seed: u64) -> Result<Self> {
        if profile_len == 0 {
            return Err(Error::invalid("profile length must be positive"));
        }
        let mut ps = ParamStore::new(dtype, seed);
        let fc = Linear::new(&mut ps, "fc", profile_len, 1)?;
        Ok(Self {
            params: ps,
            fc,
            len: profile_len,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn profile_len(&self) -> usize {
        self.len
    }

    /// `(B, M/2)` profiles to `(B,)` probabilities.
    pub fn forward(&self, profile: &Tensor) -> Result<Tensor> {
        let (_, n) = profile.dims2()?;
        if n != self.len {
            return Err(Error::invalid(format!("profile length {n}, expected {}", self.len)));
        }
        sigmoid(&self.fc.forward(profile)?.squeeze(1)?)
    }

    pub fn score(&self, profile: &[f64]) -> Result<f64> {
        let t = Tensor::from_slice(profile, (1, profile.len()), &candle_core::Device::Cpu)?
            .to_dtype(self.params.dtype())?;
        Ok(self.forward(&t)?.to_dtype(DType::F64)?.to_vec1::<f64>()?[0])
    }
}

/// Flat spatial indices sampled per encoder layer, shared between the input
/// and output passes so that row `s` of both sets comes from one location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchLocations(pub Vec<Vec<usize>>);

/// Projected, unit-norm patch features: one `(B, S_l, E)` tensor per layer.
pub struct FrequencyPatchSet {
    pub layers: Vec<Tensor>,
    pub locations: PatchLocations,
}

/// Two-layer MLP per encoder layer followed by L2 normalization.
pub struct ProjectionHead {
    params: ParamStore,
    mlps: Vec<(Linear, Linear)>,
}

impl ProjectionHead {
    pub fn new(in_channels: &[usize], embed_dim: usize, dtype: DType, seed: u64) -> Result<Self> {
        let mut ps = ParamStore::new(dtype, seed);
        let mut mlps = Vec::with_capacity(in_channels.len());
        for (l, &c) in in_channels.iter().enumerate() {
            let a = Linear::new(&mut ps, &format!("l{l}.fc1"), c, embed_dim)?;
            let b = Linear::new(&mut ps, &format!("l{l}.fc2"), embed_dim, embed_dim)?;
            mlps.push((a, b));
        }
        Ok(Self { params: ps, mlps })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Draws `num_patches` distinct locations per layer, or every location
    /// of a layer when `clamp` is set and the layer is smaller.
    pub fn sample_locations<R: Rng + ?Sized>(
        &self,
        feats: &[Tensor],
        num_patches: usize,
        clamp: bool,
        rng: &mut R,
    ) -> Result<PatchLocations> {
        let mut out = Vec::with_capacity(feats.len());
        for (l, f) in feats.iter().enumerate() {
            let (_, _, h, w) = f.dims4()?;
            let n = h * w;
            let s = if clamp { num_patches.min(n) } else { num_patches };
            if s > n {
                return Err(Error::invalid(format!("{s} patches requested from layer {l} with {n} locations")));
            }
            out.push(rand::seq::index::sample(rng, n, s).into_vec());
        }
        Ok(PatchLocations(out))
    }

    pub fn project(&self, feats: &[Tensor], locations: &PatchLocations) -> Result<FrequencyPatchSet> {
        if feats.len() != self.mlps.len() || locations.0.len() != feats.len() {
            return Err(Error::invalid("feature, head and location layer counts differ"));
        }
        let mut layers = Vec::with_capacity(feats.len());
        for ((f, (fc1, fc2)), idx) in feats.iter().zip(&self.mlps).zip(&locations.0) {
            let (b, c, h, w) = f.dims4()?;
            if idx.iter().any(|&i| i >= h * w) {
                return Err(Error::invalid("patch location outside feature map"));
            }
            let idx_t = Tensor::from_vec(idx.iter().map(|&i| i as u32).collect::<Vec<_>>(), idx.len(), f.device())?;
            let flat = f.reshape((b, c, h * w))?.transpose(1, 2)?.contiguous()?;
            let picked = flat.index_select(&idx_t, 1)?;
            let z = fc2.forward(&fc1.forward(&picked)?.relu()?)?;
            layers.push(l2_normalize(&z)?);
        }
        Ok(FrequencyPatchSet {
            layers,
            locations: locations.clone(),
        })
    }

    /// Samples fresh locations when `locations` is `None`, otherwise reuses them.
    pub fn extract_patches<R: Rng + ?Sized>(
        &self,
        feats: &[Tensor],
        locations: Option<&PatchLocations>,
        num_patches: usize,
        rng: &mut R,
    ) -> Result<FrequencyPatchSet> {
        let locs = match locations {
            Some(l) => l.clone(),
            None => self.sample_locations(feats, num_patches, false, rng)?,
        };
        self.project(feats, &locs)
    }
}
