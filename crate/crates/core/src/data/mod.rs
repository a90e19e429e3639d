//! Image ingestion, synthetic artifact sets and array export.

mod dataset;
mod dead_leaves;
mod io;
mod npz;
mod synth;

pub use dataset::{list_images, load_dataset, DatasetManifest, Domain, LoadedDataset, TaggedSample};
pub use dead_leaves::{dead_leaves, DeadLeavesConfig};
pub use io::{center_crop_square, image_to_sample, load_image, resize_area, sample_to_rgb8, save_image};
pub use npz::{read_npz, write_npz, write_spectra_npz};
pub use synth::{checkerboard_upsample, highfreq_suppress, synthesize_aliased_set, SynthMode};
