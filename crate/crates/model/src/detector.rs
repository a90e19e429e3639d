//! Real-vs-fake classifiers on normalized log-magnitude spectra.

use std::path::Path;

use candle_core::{DType, Tensor};
use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stig_core::spectral::to_spectrum;
use stig_core::ImageSample;

use crate::error::{Error, Result};
use crate::layers::{leaky_relu, softmax, softplus, Conv2d, LayerNorm, Linear, INIT_STD};
use crate::losses::scalar;
use crate::params::{Adam, ParamStore};
use crate::spectral_ops::arrays_to_tensor;
use crate::trainer::Precision;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    fn target(self) -> f64 {
        match self {
            Self::Real => 0.0,
            Self::Fake => 1.0,
        }
    }
}

/// A normalized log-magnitude spectrum (`H × W × C`) with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSample {
    pub spectrum: Array3<f32>,
    pub label: Label,
}

impl DetectorSample {
    pub fn new(spectrum: Array3<f32>, label: Label) -> Result<Self> {
        if spectrum.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("detector spectrum contains non-finite values"));
        }
        Ok(Self { spectrum, label })
    }

    /// Uses the same spectral normalization as the refinement networks.
    pub fn from_image(img: &ImageSample, label: Label) -> Result<Self> {
        Self::new(to_spectrum(img)?.log_mag().clone(), label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorArch {
    ShallowCnn,
    /// Base-size vision transformer with 16 × 16 patches.
    VitB16,
    /// Patch 8, 4 blocks, width 64, 4 heads.
    VitSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub arch: DetectorArch,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Training fraction of the seeded split.
    pub split: f64,
    /// Multiplicative learning-rate decay per epoch.
    pub lr_decay: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            arch: DetectorArch::ShallowCnn,
            lr: 2e-4,
            epochs: 20,
            batch_size: 32,
            split: 0.8,
            lr_decay: 0.9,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid("detector lr must be positive and lr_decay in (0, 1]"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        Ok(())
    }
}

struct ShallowCnn {
    convs: Vec<Conv2d>,
    head: Linear,
}

impl ShallowCnn {
    fn new(ps: &mut ParamStore, channels: usize) -> Result<Self> {
        let widths = [channels, 16, 32, 64];
        let convs = (0..3)
            .map(|i| Conv2d::new(ps, &format!("conv{i}"), widths[i], widths[i + 1], 3, 2, 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            convs,
            head: Linear::new(ps, "head", 64, 1)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for c in &self.convs {
            h = leaky_relu(&c.forward(&h)?, 0.2)?;
        }
        let pooled = h.mean((2, 3))?;
        Ok(self.head.forward(&pooled)?.squeeze(1)?)
    }
}

struct VitBlock {
    ln1: LayerNorm,
    qkv: Linear,
    proj: Linear,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
    heads: usize,
}

impl VitBlock {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, t, dim) = x.dims3()?;
        let hd = dim / self.heads;
        let qkv = self
            .qkv
            .forward(&self.ln1.forward(x)?)?
            .reshape((b, t, 3, self.heads, hd))?
            .permute((2, 0, 3, 1, 4))?;
        let q = qkv.get(0)?.contiguous()?;
        let k = qkv.get(1)?.contiguous()?;
        let v = qkv.get(2)?.contiguous()?;
        let att = softmax(&(q.matmul(&k.t()?.contiguous()?)? / (hd as f64).sqrt())?)?;
        let o = att.matmul(&v)?.transpose(1, 2)?.contiguous()?.reshape((b, t, dim))?;
        let x = (x + self.proj.forward(&o)?)?;
        let m = self.fc2.forward(&self.fc1.forward(&self.ln2.forward(&x)?)?.gelu_erf()?)?;
        Ok((x + m)?)
    }
}

struct Vit {
    embed: Conv2d,
    cls: candle_core::Var,
    pos: candle_core::Var,
    blocks: Vec<VitBlock>,
    ln: LayerNorm,
    head: Linear,
}

impl Vit {
    fn new(ps: &mut ParamStore, channels: usize, size: usize, patch: usize, depth: usize, dim: usize, heads: usize) -> Result<Self> {
        if size % patch != 0 || dim % heads != 0 {
            return Err(Error::invalid(format!("vit patch {patch} / width {dim} do not fit size {size}")));
        }
        let tokens = (size / patch).pow(2) + 1;
        let embed = Conv2d::new(ps, "embed", channels, dim, patch, patch, 0)?;
        let cls = ps.normal("cls", (1, 1, dim), INIT_STD)?;
        let pos = ps.normal("pos", (1, tokens, dim), INIT_STD)?;
        let blocks = (0..depth)
            .map(|i| {
                let n = format!("block{i}");
                Ok(VitBlock {
                    ln1: LayerNorm::new(ps, &format!("{n}.ln1"), dim)?,
                    qkv: Linear::new(ps, &format!("{n}.qkv"), dim, 3 * dim)?,
                    proj: Linear::new(ps, &format!("{n}.proj"), dim, dim)?,
                    ln2: LayerNorm::new(ps, &format!("{n}.ln2"), dim)?,
                    fc1: Linear::new(ps, &format!("{n}.fc1"), dim, 4 * dim)?,
                    fc2: Linear::new(ps, &format!("{n}.fc2"), 4 * dim, dim)?,
                    heads,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embed,
            cls,
            pos,
            blocks,
            ln: LayerNorm::new(ps, "ln", dim)?,
            head: Linear::new(ps, "head", dim, 1)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let e = self.embed.forward(x)?;
        let (b, dim, _, _) = e.dims4()?;
        let tokens = e.flatten_from(2)?.transpose(1, 2)?;
        let cls = self.cls.broadcast_as((b, 1, dim))?;
        let mut h = Tensor::cat(&[&cls, &tokens], 1)?.broadcast_add(&self.pos)?;
        for blk in &self.blocks {
            h = blk.forward(&h)?;
        }
        let first = self.ln.forward(&h)?.narrow(1, 0, 1)?.squeeze(1)?;
        Ok(self.head.forward(&first)?.squeeze(1)?)
    }
}

enum Net {
    Cnn(ShallowCnn),
    Vit(Vit),
}

/// A trained classifier; positive logits mean "fake".
pub struct Detector {
    params: ParamStore,
    net: Net,
    shape: (usize, usize, usize),
}

impl Detector {
    pub fn new(arch: DetectorArch, shape: (usize, usize, usize), dtype: DType, seed: u64) -> Result<Self> {
        let (h, w, c) = shape;
        let mut ps = ParamStore::new(dtype, seed);
        let net = match arch {
            DetectorArch::ShallowCnn => Net::Cnn(ShallowCnn::new(&mut ps, c)?),
            DetectorArch::VitB16 | DetectorArch::VitSmall => {
                if h != w {
                    return Err(Error::invalid("vision transformer expects square spectra"));
                }
                let (patch, depth, dim, heads) = match arch {
                    DetectorArch::VitB16 => (16, 12, 768, 12),
                    _ => (8, 4, 64, 4),
                };
                Net::Vit(Vit::new(&mut ps, c, h, patch, depth, dim, heads)?)
            }
        };
        Ok(Self { params: ps, net, shape })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    fn batch(&self, samples: &[&DetectorSample]) -> Result<Tensor> {
        for s in samples {
            if s.spectrum.dim() != self.shape {
                return Err(Error::invalid(format!("spectrum {:?} does not match {:?}", s.spectrum.dim(), self.shape)));
            }
        }
        let arrays: Vec<_> = samples.iter().map(|s| &s.spectrum).collect();
        arrays_to_tensor(&arrays, self.params.dtype())
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        match &self.net {
            Net::Cnn(n) => n.forward(x),
            Net::Vit(n) => n.forward(x),
        }
    }

    /// `P(fake)` per spectrum.
    pub fn predict(&self, spectra: &[&Array3<f32>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(spectra.len());
        for chunk in spectra.chunks(64) {
            let x = arrays_to_tensor(chunk, self.params.dtype())?;
            let z: Vec<f64> = self.logits(&x)?.to_dtype(DType::F64)?.to_vec1()?;
            out.extend(z.iter().map(|v| 1.0 / (1.0 + (-v).exp())));
        }
        Ok(out)
    }

    /// Fraction of samples whose thresholded prediction matches the label.
    pub fn accuracy(&self, samples: &[&DetectorSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::invalid("accuracy of an empty set"));
        }
        let arrays: Vec<_> = samples.iter().map(|s| &s.spectrum).collect();
        let p = self.predict(&arrays)?;
        let correct = p
            .iter()
            .zip(samples)
            .filter(|(p, s)| (**p > 0.5) == (s.label == Label::Fake))
            .count();
        Ok(correct as f64 / samples.len() as f64)
    }
}

pub struct TrainedDetector {
    pub detector: Detector,
    pub val_accuracy: f64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Binary cross-entropy with logits, `mean(softplus(z) − y·z)`.
pub fn bce_with_logits(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    Ok((softplus(logits)? - (logits * targets)?)?.mean_all()?)
}

/// Seeded train/validation split, then minibatch Adam with per-epoch
/// exponential learning-rate decay.
pub fn train_detector(samples: &[DetectorSample], cfg: &DetectorConfig) -> Result<TrainedDetector> {
    cfg.validate()?;
    let first = samples.first().ok_or_else(|| Error::invalid("no detector samples"))?;
    let has = |l: Label| samples.iter().any(|s| s.label == l);
    if !(has(Label::Real) && has(Label::Fake)) {
        return Err(Error::invalid("detector training needs both real and fake samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((samples.len() as f64 * cfg.split).round() as usize).clamp(1, samples.len() - 1);
    let train_indices = order[..n_train].to_vec();
    let val_indices = order[n_train..].to_vec();

    let dtype = cfg.precision.dtype();
    let detector = Detector::new(cfg.arch, first.spectrum.dim(), dtype, cfg.seed.wrapping_add(1))?;
    let mut opt = Adam::new(0.9, 0.999);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut idx = train_indices.clone();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr * cfg.lr_decay.powi(epoch as i32);
        idx.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in idx.chunks(cfg.batch_size) {
            let batch: Vec<&DetectorSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let x = detector.batch(&batch)?;
            let y: Vec<f64> = batch.iter().map(|s| s.label.target()).collect();
            let y = Tensor::from_vec(y, batch.len(), x.device())?.to_dtype(dtype)?;
            let loss = bce_with_logits(&detector.logits(&x)?, &y)?;
            let v = scalar(&loss)?;
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: epoch,
                    component: "detector".into(),
                });
            }
            let grads = loss.backward()?;
            opt.step(&detector.params, &grads, lr)?;
            total += v;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    let val: Vec<&DetectorSample> = val_indices.iter().map(|&i| &samples[i]).collect();
    let val_accuracy = detector.accuracy(&val)?;
    Ok(TrainedDetector {
        detector,
        val_accuracy,
        train_indices,
        val_indices,
        epoch_losses,
    })
}

/// Balanced accuracies of a detector on real-vs-original and real-vs-refined fakes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub accuracy_original: f64,
    pub accuracy_refined: f64,
    /// Samples per class in each evaluation.
    pub per_class: usize,
}

pub fn evaluate_confusion(
    detector: &Detector,
    original_fake: &[Array3<f32>],
    refined_fake: &[Array3<f32>],
    real: &[Array3<f32>],
) -> Result<ConfusionReport> {
    let n = real.len().min(original_fake.len()).min(refined_fake.len());
    if n == 0 {
        return Err(Error::invalid("confusion evaluation needs non-empty real, original and refined sets"));
    }
    let real_p = detector.predict(&real[..n].iter().collect::<Vec<_>>())?;
    let real_ok = real_p.iter().filter(|p| **p <= 0.5).count();
    let acc = |fake: &[Array3<f32>]| -> Result<f64> {
        let p = detector.predict(&fake[..n].iter().collect::<Vec<_>>())?;
        let ok = p.iter().filter(|p| **p > 0.5).count();
        Ok((real_ok + ok) as f64 / (2 * n) as f64)
    };
    Ok(ConfusionReport {
        accuracy_original: acc(original_fake)?,
        accuracy_refined: acc(refined_fake)?,
        per_class: n,
    })
}

/// One row of the confusion table: a detector on one benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub method: String,
    pub benchmark: String,
    pub original: f64,
    pub refined: f64,
    pub per_class: usize,
}

pub fn write_confusion_csv(path: &Path, rows: &[ConfusionRow]) -> Result<()> {
    let err = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
