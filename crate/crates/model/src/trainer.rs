//! Optimization loop, learning-rate schedule and the refine path.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::{DType, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stig_core::spectral::{SpectralTransform, SpectrumRecord};
use stig_core::ImageSample;

use crate::error::{Error, Result};
use crate::losses::{
    lf_loss, lsgan_discriminator, lsgan_generator, pcl_loss, rec_loss, scalar, LossWeights, SsimConfig,
};
use crate::networks::{FrequencyPatchSet, Generator, ModelConfig, PatchDiscriminator, ProjectionHead, SpectralDiscriminator};
use crate::params::Adam;
use crate::spectral_ops::{arrays_to_tensor, raw_magnitude, ring_mean_operator, ring_profile, tensor_to_arrays, Reconstructor, SpectrumBatch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn dtype(self) -> DType {
        match self {
            Self::F32 => DType::F32,
            Self::F64 => DType::F64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub total_steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Fraction of steps at constant learning rate before the linear decay.
    pub warm_fraction: f64,
    pub seed: u64,
    /// Random quarter-turn rotation of each training image.
    pub augment_rotation: bool,
    pub image_size: usize,
    /// Patches sampled per encoder layer, capped at the layer's location count.
    pub num_patches: usize,
    pub weights: LossWeights,
    pub model: ModelConfig,
    pub ssim: SsimConfig,
    pub precision: Precision,
    /// Adam `(β1, β2)` of all four networks.
    pub betas: (f64, f64),
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            total_steps: 2000,
            lr: 8e-5,
            batch_size: 1,
            warm_fraction: 0.2,
            seed: 0,
            augment_rotation: false,
            image_size: 64,
            num_patches: 256,
            weights: LossWeights::default(),
            model: ModelConfig::default(),
            ssim: SsimConfig::default(),
            precision: Precision::F32,
            betas: (0.5, 0.999),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.warm_fraction) {
            return Err(Error::invalid(format!("warm_fraction must lie in [0, 1], got {}", self.warm_fraction)));
        }
        if self.image_size == 0 || self.image_size % 2 != 0 {
            return Err(Error::invalid(format!("image_size must be even, got {}", self.image_size)));
        }
        if self.batch_size == 0 || self.total_steps == 0 {
            return Err(Error::invalid("batch_size and total_steps must be positive"));
        }
        if self.num_patches < 2 {
            return Err(Error::invalid("num_patches must be at least 2"));
        }
        if self.weights.sigma >= self.image_size / 2 {
            return Err(Error::invalid(format!("sigma {} too large for size {}", self.weights.sigma, self.image_size)));
        }
        if self.ssim.window > self.image_size {
            return Err(Error::invalid("ssim window larger than the image"));
        }
        self.weights.validate()?;
        self.model.validate(self.image_size)
    }
}

/// Constant `lr` for the first `warm_fraction` of the run, then linear decay
/// reaching zero at `total_steps`.
pub fn lr_at(step: usize, cfg: &TrainingConfig) -> Result<f64> {
    let total = cfg.total_steps;
    if step > total {
        return Err(Error::invalid(format!("step {step} beyond total {total}")));
    }
    let warm = cfg.warm_fraction * total as f64;
    let s = step as f64;
    if s < warm {
        return Ok(cfg.lr);
    }
    let rest = total as f64 - warm;
    if rest <= 0.0 {
        return Ok(0.0);
    }
    Ok(cfg.lr * (total as f64 - s) / rest)
}

/// Losses of one training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub lr: f64,
    pub adv: f64,
    pub pcl: f64,
    pub rec: f64,
    pub spec: f64,
    pub lf: f64,
    pub gen_total: f64,
    pub d_patch: f64,
    pub d_spectral: f64,
    pub wall_time_s: f64,
}

/// A refined image together with its refined spectrum (original phase).
#[derive(Clone, Debug)]
pub struct Refined {
    pub image: ImageSample,
    pub spectrum: SpectrumRecord<f32>,
}

/// The four networks with their optimizers.
pub struct Stig {
    pub(crate) cfg: TrainingConfig,
    pub(crate) g: Generator,
    pub(crate) h: ProjectionHead,
    pub(crate) d: PatchDiscriminator,
    pub(crate) ds: SpectralDiscriminator,
    pub(crate) opts: [Adam; 4],
    pub(crate) step: usize,
    recon: Reconstructor,
    ring_op: Tensor,
    transform: SpectralTransform<f32>,
}

fn network_seeds(seed: u64) -> [u64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| rng.random())
}

fn step_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream offset for per-epoch data permutations, disjoint from step streams.
const EPOCH_STREAM: u64 = 1 << 48;

impl Stig {
    pub fn new(cfg: TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        let dtype = cfg.precision.dtype();
        let n = cfg.image_size;
        let seeds = network_seeds(cfg.seed);
        let g = Generator::new(&cfg.model, n, dtype, seeds[0])?;
        let h = ProjectionHead::new(&g.tap_channels(), cfg.model.embed_dim, dtype, seeds[1])?;
        let d = PatchDiscriminator::new(&cfg.model, n, dtype, seeds[2])?;
        let ds = SpectralDiscriminator::new(n / 2, dtype, seeds[3])?;
        let (b1, b2) = cfg.betas;
        Ok(Self {
            opts: std::array::from_fn(|_| Adam::new(b1, b2)),
            recon: Reconstructor::new(n, n, dtype)?,
            ring_op: ring_mean_operator(n, n, dtype)?,
            transform: SpectralTransform::new(n, n)?,
            cfg,
            g,
            h,
            d,
            ds,
            step: 0,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.cfg
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn generator(&self) -> &Generator {
        &self.g
    }

    pub fn projection_head(&self) -> &ProjectionHead {
        &self.h
    }

    pub fn patch_discriminator(&self) -> &PatchDiscriminator {
        &self.d
    }

    pub fn spectral_discriminator(&self) -> &SpectralDiscriminator {
        &self.ds
    }

    fn dtype(&self) -> DType {
        self.cfg.precision.dtype()
    }

    fn spectra(&self, images: &[ImageSample]) -> Result<(Vec<SpectrumRecord<f32>>, SpectrumBatch)> {
        let records = images
            .iter()
            .map(|img| self.transform.to_spectrum(img))
            .collect::<stig_core::Result<Vec<_>>>()?;
        let batch = SpectrumBatch::from_records(&records, self.dtype())?;
        Ok((records, batch))
    }

    /// One joint update of all networks from unpaired batches.
    ///
    /// All losses are computed before any parameter changes: the generator
    /// objective against the current discriminators and the discriminator
    /// objectives on the detached generator output. If any is non-finite the
    /// step is abandoned without touching parameters.
    pub fn train_step(&mut self, fake: &[ImageSample], real: &[ImageSample]) -> Result<LossRecord> {
        let started = Instant::now();
        if fake.is_empty() || real.is_empty() {
            return Err(Error::invalid("train_step needs non-empty batches"));
        }
        let step = self.step;
        let lr = lr_at(step.min(self.cfg.total_steps), &self.cfg)?;
        let mut rng = step_rng(self.cfg.seed, step as u64 + 1);
        let rotate = |imgs: &[ImageSample], rng: &mut ChaCha8Rng| -> Vec<ImageSample> {
            imgs.iter()
                .map(|img| {
                    if self.cfg.augment_rotation {
                        img.rotate90(rng.random_range(0..4))
                    } else {
                        img.clone()
                    }
                })
                .collect()
        };
        let fake = rotate(fake, &mut rng);
        let real = rotate(real, &mut rng);
        let (_, fb) = self.spectra(&fake)?;
        let (_, rb) = self.spectra(&real)?;
        let w = self.cfg.weights.clone();

        let (y, taps) = self.g.forward_with_taps(&fb.log_mag)?;
        let mut terms: Vec<Tensor> = Vec::new();
        let mut rec = LossRecord {
            step,
            lr,
            adv: 0.0,
            pcl: 0.0,
            rec: 0.0,
            spec: 0.0,
            lf: 0.0,
            gen_total: 0.0,
            d_patch: 0.0,
            d_spectral: 0.0,
            wall_time_s: 0.0,
        };
        if w.adv > 0.0 {
            let l = lsgan_generator(&self.d.forward(&y)?)?;
            rec.adv = scalar(&l)?;
            terms.push((l * w.adv)?);
        }
        if w.pcl > 0.0 {
            let locs = self.h.sample_locations(&taps, self.cfg.num_patches, true, &mut rng)?;
            let f_in = self.h.project(&taps, &locs)?;
            let f_in = FrequencyPatchSet {
                layers: f_in.layers.iter().map(Tensor::detach).collect(),
                locations: f_in.locations,
            };
            let f_out = self.h.project(&self.g.encode(&y)?, &locs)?;
            let l = pcl_loss(&f_in, &f_out, w.tau)?;
            rec.pcl = scalar(&l)?;
            terms.push((l * w.pcl)?);
        }
        if w.rec > 0.0 || w.lf > 0.0 {
            let mag_in = fb.raw_magnitude()?;
            let mag_out = raw_magnitude(&y, &fb.lo, &fb.span)?;
            if w.rec > 0.0 {
                let pixels: Vec<_> = fake.iter().map(|s| s.pixels()).collect();
                let img_in = arrays_to_tensor(&pixels, self.dtype())?;
                let img_out = self.recon.reconstruct(&mag_out, &fb.cos, &fb.sin)?;
                let l = rec_loss(&img_in, &img_out, &self.cfg.ssim)?;
                rec.rec = scalar(&l)?;
                terms.push((l * w.rec)?);
            }
            if w.lf > 0.0 {
                // magnitudes on the orthonormal DFT scale |F|/√(HW)
                let n = self.cfg.image_size;
                let l = (lf_loss(&mag_in, &mag_out, w.sigma)? / (n * n) as f64)?;
                rec.lf = scalar(&l)?;
                terms.push((l * w.lf)?);
            }
        }
        if w.spec > 0.0 {
            let p = ring_profile(&y, &self.ring_op)?;
            let l = lsgan_generator(&self.ds.forward(&p)?)?;
            rec.spec = scalar(&l)?;
            terms.push((l * w.spec)?);
        }

        let y_det = y.detach();
        let mut d_terms: Vec<Tensor> = Vec::new();
        if w.adv > 0.0 {
            let l = lsgan_discriminator(&self.d.forward(&rb.log_mag)?, &self.d.forward(&y_det)?)?;
            rec.d_patch = scalar(&l)?;
            d_terms.push((l * w.adv)?);
        }
        if w.spec > 0.0 {
            let pr = ring_profile(&rb.log_mag, &self.ring_op)?;
            let pf = ring_profile(&y_det, &self.ring_op)?;
            let l = lsgan_discriminator(&self.ds.forward(&pr)?, &self.ds.forward(&pf)?)?;
            rec.d_spectral = scalar(&l)?;
            d_terms.push((l * w.spec)?);
        }

        let gen_total = sum_terms(&terms)?;
        let d_total = sum_terms(&d_terms)?;
        rec.gen_total = match &gen_total {
            Some(t) => scalar(t)?,
            None => 0.0,
        };
        for (name, v) in [
            ("adv", rec.adv),
            ("pcl", rec.pcl),
            ("rec", rec.rec),
            ("spec", rec.spec),
            ("lf", rec.lf),
            ("generator total", rec.gen_total),
            ("patch discriminator", rec.d_patch),
            ("spectral discriminator", rec.d_spectral),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    component: name.into(),
                });
            }
        }

        if let Some(t) = gen_total {
            let grads = t.backward()?;
            self.opts[0].step(self.g.params(), &grads, lr)?;
            self.opts[1].step(self.h.params(), &grads, lr)?;
        }
        if let Some(t) = d_total {
            let grads = t.backward()?;
            self.opts[2].step(self.d.params(), &grads, lr)?;
            self.opts[3].step(self.ds.params(), &grads, lr)?;
        }
        self.step += 1;
        rec.wall_time_s = started.elapsed().as_secs_f64();
        Ok(rec)
    }

    /// Fake-set indices for the given step: a fresh seeded permutation each epoch.
    fn fake_indices(&self, step: usize, n: usize) -> Vec<usize> {
        let b = self.cfg.batch_size;
        (0..b)
            .map(|k| {
                let pos = step * b + k;
                let epoch = (pos / n) as u64;
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut step_rng(self.cfg.seed, EPOCH_STREAM + epoch));
                perm[pos % n]
            })
            .collect()
    }

    /// Runs the remaining steps up to `total_steps`.
    ///
    /// Each record is appended to `outputs.log` as one JSON line. A step with a
    /// non-finite loss is logged as an error line and skipped; ten in a row abort.
    pub fn fit(&mut self, fake: &[ImageSample], real: &[ImageSample], outputs: &TrainOutputs) -> Result<Vec<LossRecord>> {
        if fake.is_empty() || real.is_empty() {
            return Err(Error::invalid("training needs both real and fake images"));
        }
        let mut log = match &outputs.log {
            Some(p) => Some(std::io::BufWriter::new(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::io(p, e))?,
            )),
            None => None,
        };
        let mut records = Vec::new();
        let mut failures = 0;
        while self.step < self.cfg.total_steps {
            let step = self.step;
            let fi = self.fake_indices(step, fake.len());
            let mut rng = step_rng(self.cfg.seed, EPOCH_STREAM / 2 + step as u64);
            let fb: Vec<_> = fi.iter().map(|&i| fake[i].clone()).collect();
            let rb: Vec<_> = (0..self.cfg.batch_size)
                .map(|_| real[rng.random_range(0..real.len())].clone())
                .collect();
            let line = match self.train_step(&fb, &rb) {
                Ok(r) => {
                    failures = 0;
                    let line = serde_json::to_string(&r).expect("record serializes");
                    records.push(r);
                    line
                }
                Err(Error::NonFiniteLoss { step, component }) => {
                    failures += 1;
                    log::warn!("step {step}: non-finite {component} loss, skipped");
                    self.step += 1;
                    if failures >= 10 {
                        return Err(Error::NonFiniteLoss { step, component });
                    }
                    serde_json::json!({"step": step, "error": format!("non-finite {component} loss")}).to_string()
                }
                Err(e) => return Err(e),
            };
            if let Some(w) = log.as_mut() {
                writeln!(w, "{line}").map_err(|e| Error::io(outputs.log.as_ref().unwrap(), e))?;
            }
            if let (Some(dir), Some(every)) = (&outputs.checkpoint_dir, outputs.checkpoint_every) {
                if every > 0 && self.step % every == 0 && self.step < self.cfg.total_steps {
                    self.save(&dir.join(format!("step_{:07}.ckpt", self.step)))?;
                }
            }
        }
        if let Some(w) = log.as_mut() {
            w.flush().map_err(|e| Error::io(outputs.log.as_ref().unwrap(), e))?;
        }
        Ok(records)
    }
}

fn sum_terms(terms: &[Tensor]) -> Result<Option<Tensor>> {
    let mut it = terms.iter();
    let Some(first) = it.next() else {
        return Ok(None);
    };
    let mut acc = first.clone();
    for t in it {
        acc = (acc + t)?;
    }
    Ok(Some(acc))
}

/// Where [`Stig::fit`] writes its artifacts.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    pub log: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every: Option<usize>,
}

/// Refines images through the generator, reusing each image's own phase.
pub fn refine(g: &Generator, images: &[ImageSample]) -> Result<Vec<Refined>> {
    let n = g.image_size();
    let dtype = g.params().dtype();
    let transform = SpectralTransform::<f32>::new(n, n)?;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(16) {
        let records = chunk
            .iter()
            .map(|img| {
                if (img.height(), img.width()) != (n, n) {
                    return Err(Error::invalid(format!(
                        "image {}x{} does not match model size {n}",
                        img.height(),
                        img.width()
                    )));
                }
                Ok(transform.to_spectrum(img)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let batch = SpectrumBatch::from_records(&records, dtype)?;
        let y = g.forward(&batch.log_mag)?;
        for (rec, lm) in records.iter().zip(tensor_to_arrays(&y)?) {
            let spectrum = rec.with_log_mag(lm)?;
            let image = transform.to_image(&spectrum)?;
            out.push(Refined { image, spectrum });
        }
    }
    Ok(out)
}

pub fn checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("final.ckpt")
}
