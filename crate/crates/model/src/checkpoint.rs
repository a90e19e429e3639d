//! Binary checkpoint: magic, format version, JSON header, little-endian payload.

use std::io::Write;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::networks::Generator;
use crate::params::ParamStore;
use crate::trainer::{Stig, TrainingConfig};

const MAGIC: &[u8; 8] = b"STIGCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    step: usize,
    dtype: String,
    config: TrainingConfig,
    optimizer_steps: [u64; 4],
    tensors: Vec<TensorEntry>,
}

fn ckpt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        message: msg.into(),
    }
}

const NETWORKS: [&str; 4] = ["g", "h", "d", "ds"];

impl Stig {
    fn stores(&self) -> [&ParamStore; 4] {
        [self.g.params(), self.h.params(), self.d.params(), self.ds.params()]
    }

    /// Writes all parameters, optimizer moments and the step counter.
    /// The file is written next to `path` and renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dtype = self.cfg.precision.dtype();
        let mut named: Vec<(String, Tensor)> = Vec::new();
        for (net, ps) in NETWORKS.iter().zip(self.stores()) {
            for (n, t) in ps.snapshot() {
                named.push((format!("{net}.{n}"), t));
            }
        }
        for ((net, ps), opt) in NETWORKS.iter().zip(self.stores()).zip(&self.opts) {
            for (n, t) in opt.state(ps) {
                named.push((format!("opt.{net}.{n}"), t));
            }
        }
        let mut payload = Vec::new();
        let mut entries = Vec::with_capacity(named.len());
        for (name, t) in &named {
            let offset = payload.len();
            let flat = t.flatten_all()?;
            match dtype {
                DType::F64 => {
                    for v in flat.to_dtype(DType::F64)?.to_vec1::<f64>()? {
                        payload.extend_from_slice(&v.to_le_bytes());
                    }
                }
                _ => {
                    for v in flat.to_dtype(DType::F32)?.to_vec1::<f32>()? {
                        payload.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.dims().to_vec(),
                offset,
                len: payload.len() - offset,
            });
        }
        let header = Header {
            step: self.step,
            dtype: if dtype == DType::F64 { "f64" } else { "f32" }.into(),
            config: self.cfg.clone(),
            optimizer_steps: std::array::from_fn(|i| self.opts[i].steps()),
            tensors: entries,
        };
        let header = serde_json::to_vec(&header).map_err(|e| ckpt_err(path, e.to_string()))?;
        let tmp = path.with_extension("ckpt.tmp");
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?);
            let io = |e| Error::io(&tmp, e);
            f.write_all(MAGIC).map_err(io)?;
            f.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
            f.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
            f.write_all(&header).map_err(io)?;
            f.write_all(&payload).map_err(io)?;
            f.flush().map_err(io)?;
        }
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Restores a full training state.
    pub fn load(path: &Path) -> Result<Self> {
        let (header, tensors) = read(path)?;
        let mut stig = Stig::new(header.config.clone())?;
        for (net, ps) in NETWORKS.iter().zip(stig.stores()) {
            ps.load(&select(&tensors, &format!("{net}."))).map_err(|e| ckpt_err(path, e.to_string()))?;
        }
        for (i, net) in NETWORKS.iter().enumerate() {
            let state = select(&tensors, &format!("opt.{net}."));
            let ps = stig.stores()[i];
            let mut opt = crate::params::Adam::new(header.config.betas.0, header.config.betas.1);
            opt.restore(ps, header.optimizer_steps[i], &state)
                .map_err(|e| ckpt_err(path, e.to_string()))?;
            stig.opts[i] = opt;
        }
        stig.step = header.step;
        Ok(stig)
    }
}

fn select(tensors: &[(String, Tensor)], prefix: &str) -> Vec<(String, Tensor)> {
    tensors
        .iter()
        .filter_map(|(n, t)| n.strip_prefix(prefix).map(|s| (s.to_string(), t.clone())))
        .collect()
}

fn read(path: &Path) -> Result<(Header, Vec<(String, Tensor)>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(ckpt_err(path, "not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ckpt_err(path, format!("unsupported format version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = bytes.get(20..20 + hlen).ok_or_else(|| ckpt_err(path, "truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| ckpt_err(path, e.to_string()))?;
    let payload = &bytes[20 + hlen..];
    let (width, dtype) = match header.dtype.as_str() {
        "f32" => (4, DType::F32),
        "f64" => (8, DType::F64),
        other => return Err(ckpt_err(path, format!("unknown dtype {other}"))),
    };
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in &header.tensors {
        let raw = payload
            .get(e.offset..e.offset + e.len)
            .ok_or_else(|| ckpt_err(path, format!("tensor {} outside payload", e.name)))?;
        let count: usize = e.shape.iter().product();
        if raw.len() != count * width {
            return Err(ckpt_err(path, format!("tensor {} has {} bytes for {count} values", e.name, raw.len())));
        }
        let t = if width == 8 {
            let v: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
        } else {
            let v: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
        };
        tensors.push((e.name.clone(), t.to_dtype(dtype)?));
    }
    Ok((header, tensors))
}

/// Loads only the generator, for refinement.
pub fn load_generator(path: &Path) -> Result<Generator> {
    let (header, tensors) = read(path)?;
    let cfg = &header.config;
    let g = Generator::new(&cfg.model, cfg.image_size, cfg.precision.dtype(), 0)?;
    g.params().load(&select(&tensors, "g.")).map_err(|e| ckpt_err(path, e.to_string()))?;
    Ok(g)
}

/// Training configuration stored in a checkpoint.
pub fn checkpoint_config(path: &Path) -> Result<TrainingConfig> {
    Ok(read(path)?.0.config)
}

/// Hex SHA-256 of a file.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
