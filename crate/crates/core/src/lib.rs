//! Spectral analysis, evaluation metrics and dataset handling for
//! frequency-domain refinement of generated images.
//!
//! The crate is pure CPU code without a tensor runtime. The trainable parts
//! live in `stig-model`, which builds on the types defined here.

pub mod data;
pub mod error;
pub mod metrics;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{ImageSample, Real, SpectrumRecord};
