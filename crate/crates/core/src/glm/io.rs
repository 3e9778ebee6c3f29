//! Designs from a headed CSV file selected by a JSON manifest:
//!
//! ```json
//! {"data": "pheno.csv", "response": "y", "inquiry": ["g1", "g2"],
//!  "controls": ["age"], "intercept": true, "family": "binomial_logit"}
//! ```
//!
//! A relative `data` path is resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DesignData, Family};
use crate::error::{Error, Result};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignManifest {
    pub data: PathBuf,
    pub response: String,
    pub inquiry: Vec<String>,
    #[serde(default)]
    pub controls: Vec<String>,
    /// Prepend a column of ones to the controls.
    #[serde(default = "default_true")]
    pub intercept: bool,
    pub family: Family,
}

pub fn load_design(manifest_path: impl AsRef<Path>) -> Result<DesignData> {
    let path = manifest_path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let manifest: DesignManifest = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("design manifest: {e}")))?;
    let data_path = if manifest.data.is_relative() {
        path.parent().unwrap_or(Path::new(".")).join(&manifest.data)
    } else {
        manifest.data.clone()
    };
    let csv_text = std::fs::read_to_string(&data_path)?;
    design_from_csv(&manifest, &csv_text)
}

pub fn design_from_csv(manifest: &DesignManifest, csv_text: &str) -> Result<DesignData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("column {name:?} not found in data")))
    };
    let yi = col(&manifest.response)?;
    let xi = manifest.inquiry.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let ci = manifest.controls.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("data row {}: {e} ({t:?})", ln + 2))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let big_n = rows.len();
    let y = DVector::from_fn(big_n, |k, _| rows[k][yi]);
    let x = DMatrix::from_fn(big_n, xi.len(), |k, j| rows[k][xi[j]]);
    let off = manifest.intercept as usize;
    let c = DMatrix::from_fn(big_n, ci.len() + off, |k, j| if j < off { 1.0 } else { rows[k][ci[j - off]] });
    DesignData::new(y, x, c, manifest.family)
}
