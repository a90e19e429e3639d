use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array3, ArrayView3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::resize_area;
use crate::error::{Error, Result};
use crate::spectral::{to_f64, ImageSample, Real, SpectralTransform};

/// Gaussian summary of an embedding distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct FidStats {
    pub mean: DVector<f64>,
    /// Unbiased sample covariance.
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl FidStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fewer samples than dimensions leaves the covariance rank deficient.
    pub fn well_conditioned(&self) -> bool {
        self.count > self.dim()
    }

    pub fn from_features(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut acc = FidAccumulator::new(dim);
        for r in rows {
            acc.push(r)?;
        }
        acc.finish()
    }
}

/// Welford accumulator for mean and covariance.
#[derive(Clone, Debug)]
pub struct FidAccumulator {
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    count: usize,
}

impl FidAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite embedding"));
        }
        let x = DVector::from_column_slice(x);
        self.count += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.m2.ger(1.0, &delta, &delta2, 1.0);
        Ok(())
    }

    pub fn finish(self) -> Result<FidStats> {
        if self.count < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples for a covariance, got {}",
                self.count
            )));
        }
        let mut cov = self.m2 / (self.count - 1) as f64;
        // the rank-one updates are only symmetric up to rounding
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(FidStats {
            mean: self.mean,
            cov,
            count: self.count,
        })
    }
}

/// Eigenvalues below `-tol · max(1, λ_max)` count as a PSD violation.
const PSD_TOLERANCE: f64 = 1e-9;

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NotPositiveSemiDefinite { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

fn psd_trace_sqrt(m: &DMatrix<f64>) -> Result<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NotPositiveSemiDefinite { min_eigenvalue: min });
    }
    Ok(eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// Fréchet distance between two Gaussians,
/// `‖μa − μb‖² + tr(Σa + Σb − 2 (Σa Σb)^{1/2})`.
///
/// `tr (Σa Σb)^{1/2}` is evaluated as `tr (Σa^{1/2} Σb Σa^{1/2})^{1/2}`, which
/// has the same eigenvalues but stays symmetric.
pub fn fid(a: &FidStats, b: &FidStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(a.dim(), b.dim()));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let sa = psd_sqrt(&a.cov)?;
    psd_sqrt(&b.cov)?;
    let inner = &sa * &b.cov * &sa;
    let cross = psd_trace_sqrt(&inner)?;
    let d = diff + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

/// Maps a three-channel rendering in `[-1, 1]` to a feature vector.
pub trait ImageEmbedder {
    fn dim(&self) -> usize;
    fn embed(&self, rgb: ArrayView3<f64>) -> Result<Vec<f64>>;
}

/// Area-pooled thumbnail, flattened.
#[derive(Clone, Debug)]
pub struct IdentityEmbedder {
    pub thumb: usize,
}

impl Default for IdentityEmbedder {
    fn default() -> Self {
        Self { thumb: 8 }
    }
}

impl ImageEmbedder for IdentityEmbedder {
    fn dim(&self) -> usize {
        self.thumb * self.thumb * 3
    }

    fn embed(&self, rgb: ArrayView3<f64>) -> Result<Vec<f64>> {
        check_rgb(rgb)?;
        Ok(resize_area(rgb, self.thumb, self.thumb)?.into_iter().collect())
    }
}

/// Fixed Gaussian projection of a pooled thumbnail followed by `tanh`.
#[derive(Clone, Debug)]
pub struct RandomProjectionEmbedder {
    pooled: IdentityEmbedder,
    weights: DMatrix<f64>,
}

impl RandomProjectionEmbedder {
    pub fn new(thumb: usize, dim: usize, seed: u64) -> Self {
        let pooled = IdentityEmbedder { thumb };
        let n_in = pooled.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (n_in as f64).sqrt();
        let weights = DMatrix::from_fn(dim, n_in, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        });
        Self { pooled, weights }
    }
}

impl Default for RandomProjectionEmbedder {
    fn default() -> Self {
        Self::new(16, 64, 0x5eed)
    }
}

impl ImageEmbedder for RandomProjectionEmbedder {
    fn dim(&self) -> usize {
        self.weights.nrows()
    }

    fn embed(&self, rgb: ArrayView3<f64>) -> Result<Vec<f64>> {
        let x = DVector::from_vec(self.pooled.embed(rgb)?);
        Ok((&self.weights * x).iter().map(|v| v.tanh()).collect())
    }
}

fn check_rgb(rgb: ArrayView3<f64>) -> Result<()> {
    if rgb.dim().2 != 3 {
        return Err(Error::invalid(format!("embedder expects 3 channels, got {}", rgb.dim().2)));
    }
    Ok(())
}

fn to_rgb(a: Array3<f64>) -> Result<Array3<f64>> {
    let (h, w, c) = a.dim();
    match c {
        3 => Ok(a),
        1 => Ok(Array3::from_shape_fn((h, w, 3), |(i, j, _)| a[[i, j, 0]])),
        _ => Err(Error::invalid(format!("cannot render {c} channels as RGB"))),
    }
}

/// Embeds images directly.
pub fn embed_images<T: Real>(images: &[ImageSample<T>], embedder: &dyn ImageEmbedder) -> Result<FidStats> {
    let mut acc = FidAccumulator::new(embedder.dim());
    for img in images {
        let rgb = to_rgb(img.pixels().mapv(to_f64))?;
        acc.push(&embedder.embed(rgb.view())?)?;
    }
    acc.finish()
}

/// Embeds normalized log-magnitude spectra, one channel replicated when needed.
pub fn embed_spectra<T: Real>(images: &[ImageSample<T>], embedder: &dyn ImageEmbedder) -> Result<FidStats> {
    let mut acc = FidAccumulator::new(embedder.dim());
    let mut transform: Option<SpectralTransform<f64>> = None;
    for img in images {
        let img = img.cast::<f64>();
        let t = match &transform {
            Some(t) if t.dims() == (img.height(), img.width()) => t,
            _ => transform.insert(SpectralTransform::new(img.height(), img.width())?),
        };
        let spec = t.to_spectrum(&img)?;
        let rgb = to_rgb(spec.log_mag().clone())?;
        acc.push(&embedder.embed(rgb.view())?)?;
    }
    acc.finish()
}
