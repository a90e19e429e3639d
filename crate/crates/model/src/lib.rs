//! Trainable side of frequency-domain refinement: a nested U-Net that maps
//! the normalized log-magnitude spectrum of a generated image toward the real
//! spectrum distribution, its discriminators and contrastive projection head,
//! the training objectives and loop, and spectrum-based fake detectors.
//!
//! Everything runs on the CPU through `candle-core`. Parameters are
//! initialized from seeded streams so runs with one seed are reproducible.

pub mod checkpoint;
pub mod detector;
pub mod error;
pub mod layers;
pub mod losses;
pub mod networks;
pub mod params;
pub mod spectral_ops;
pub mod trainer;

pub use checkpoint::{checkpoint_config, file_sha256, load_generator};
pub use error::{Error, Result};
pub use losses::{LossComponents, LossWeights, SsimConfig};
pub use networks::{Generator, ModelConfig, PatchDiscriminator, ProjectionHead, SpectralDiscriminator};
pub use trainer::{lr_at, refine, LossRecord, Precision, Refined, Stig, TrainOutputs, TrainingConfig};
