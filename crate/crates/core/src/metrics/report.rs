use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub benchmark: String,
    /// `original` or `refined`.
    pub variant: String,
    #[serde(rename = "FID_image")]
    pub fid_image: f64,
    #[serde(rename = "FID_spectrum")]
    pub fid_spectrum: f64,
    #[serde(rename = "LFD_raw")]
    pub lfd_raw: f64,
    #[serde(rename = "LFD_norm")]
    pub lfd_norm: f64,
    pub n_real: usize,
    pub n_fake: usize,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
