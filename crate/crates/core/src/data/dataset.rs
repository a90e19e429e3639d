use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::load_image;
use crate::error::{Error, Result};
use crate::spectral::ImageSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Fake,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub real_dir: PathBuf,
    pub fake_dir: PathBuf,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default)]
    pub max_samples: Option<usize>,
    #[serde(default = "default_benchmark")]
    pub benchmark: String,
}

fn default_image_size() -> usize {
    64
}

fn default_benchmark() -> String {
    "desk".into()
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.image_size % 2 != 0 {
            return Err(Error::invalid(format!("image_size must be even and positive, got {}", self.image_size)));
        }
        if self.max_samples == Some(0) {
            return Err(Error::invalid("max_samples must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TaggedSample {
    pub domain: Domain,
    pub path: PathBuf,
    pub image: ImageSample,
}

#[derive(Clone, Debug, Default)]
pub struct LoadedDataset {
    pub real: Vec<TaggedSample>,
    pub fake: Vec<TaggedSample>,
}

impl LoadedDataset {
    pub fn images(&self, domain: Domain) -> Vec<ImageSample> {
        let set = match domain {
            Domain::Real => &self.real,
            Domain::Fake => &self.fake,
        };
        set.iter().map(|s| s.image.clone()).collect()
    }
}

/// PNG and JPEG files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(Error::Empty(format!("no images in {}", dir.display())));
    }
    files.sort();
    Ok(files)
}

fn load_domain(
    dir: &Path,
    domain: Domain,
    size: usize,
    max: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TaggedSample>> {
    let mut files = list_images(dir)?;
    files.shuffle(rng);
    let limit = max.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for path in files {
        if out.len() >= limit {
            break;
        }
        match load_image(&path, size) {
            Ok(image) => out.push(TaggedSample { domain, path, image }),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no readable images in {}", dir.display())));
    }
    Ok(out)
}

/// Loads both domains in a seeded order. The two domains are shuffled with
/// independent streams, so sample `i` of each side is unpaired.
pub fn load_dataset(manifest: &DatasetManifest, seed: u64) -> Result<LoadedDataset> {
    manifest.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = load_domain(&manifest.real_dir, Domain::Real, manifest.image_size, manifest.max_samples, &mut rng)?;
    rng.set_stream(1);
    let fake = load_domain(&manifest.fake_dir, Domain::Fake, manifest.image_size, manifest.max_samples, &mut rng)?;
    Ok(LoadedDataset { real, fake })
}
