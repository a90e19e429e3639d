//! Run configuration, read from a TOML document and validated before any work.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stig_core::data::DatasetManifest;
use stig_core::metrics::{IdentityEmbedder, ImageEmbedder, RandomProjectionEmbedder};
use stig_model::detector::DetectorConfig;
use stig_model::TrainingConfig;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    /// 8×8 area thumbnails used directly as features.
    Identity,
    /// Fixed seeded random projection of 16×16 thumbnails.
    #[default]
    RandomProjection,
}

impl EmbedderKind {
    pub fn build(self) -> Box<dyn ImageEmbedder> {
        match self {
            Self::Identity => Box::new(IdentityEmbedder::default()),
            Self::RandomProjection => Box::new(RandomProjectionEmbedder::default()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub embedder: EmbedderKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; overrides the seeds of the training and detector sections.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: Option<DatasetManifest>,
    pub training: TrainingConfig,
    pub detector: DetectorConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("stig-out"),
            data: None,
            training: TrainingConfig::default(),
            detector: DetectorConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| Error::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        self.detector.validate()?;
        if let Some(data) = &self.data {
            data.validate()?;
            if data.image_size != self.training.image_size {
                return Err(Error::usage(format!(
                    "data.image_size {} differs from training.image_size {}",
                    data.image_size, self.training.image_size
                )));
            }
        }
        Ok(())
    }

    /// Applies command-line overrides and propagates the master seed.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        self.training.seed = self.seed;
        self.detector.seed = self.seed;
        self
    }
}
