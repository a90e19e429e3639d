use std::fs::File;
use std::path::Path;

use ndarray::{Array1, ArrayD};
use ndarray_npy::{NpzReader, NpzWriter};

use crate::error::{Error, Result};
use crate::spectral::SpectrumRecord;

fn container_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::ArrayContainer {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes named `f32` arrays into an `.npz` archive.
pub fn write_npz(path: &Path, arrays: &[(String, ArrayD<f32>)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut npz = NpzWriter::new(file);
    for (name, a) in arrays {
        npz.add_array(name.as_str(), a).map_err(|e| container_err(path, e))?;
    }
    npz.finish().map_err(|e| container_err(path, e))?;
    Ok(())
}

pub fn read_npz(path: &Path) -> Result<Vec<(String, ArrayD<f32>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut npz = NpzReader::new(file).map_err(|e| container_err(path, e))?;
    let mut names = npz.names().map_err(|e| container_err(path, e))?;
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let a: ArrayD<f32> = npz.by_name(&n).map_err(|e| container_err(path, e))?;
            Ok((n.trim_end_matches(".npy").to_string(), a))
        })
        .collect()
}

/// Exports spectra as `<name>_log_mag`, `<name>_phase` and `<name>_norm`
/// (a `C × 2` array of min/max) entries.
pub fn write_spectra_npz(path: &Path, records: &[(String, SpectrumRecord<f32>)]) -> Result<()> {
    let mut arrays = Vec::with_capacity(records.len() * 3);
    for (name, rec) in records {
        arrays.push((format!("{name}_log_mag"), rec.log_mag().clone().into_dyn()));
        arrays.push((format!("{name}_phase"), rec.phase().clone().into_dyn()));
        if let Some(norm) = rec.norm() {
            let flat: Array1<f32> = norm.iter().flat_map(|r| [r.min, r.max]).collect();
            let a = flat
                .into_shape_with_order((norm.len(), 2))
                .map_err(|e| container_err(path, e))?;
            arrays.push((format!("{name}_norm"), a.into_dyn()));
        }
    }
    write_npz(path, &arrays)
}

