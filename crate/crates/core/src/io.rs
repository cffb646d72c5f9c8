//! Matrix CSV files (one row per line, no header) and model JSON files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{FpsError, Result};
use crate::models::ModelInstance;
use crate::spectral::SymMat;
use crate::support::SupportSet;

/// Parses a dense matrix from CSV text.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(FpsError::invalid(format!(
                    "row {} has {} columns, expected {c}",
                    line + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| FpsError::invalid(format!("row {}: cannot parse {field:?} as a number", line + 1)))?;
            if !v.is_finite() {
                return Err(FpsError::invalid(format!("row {}: non-finite entry {field:?}", line + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| FpsError::invalid("matrix file is empty"))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| FpsError::invalid(e.to_string()))
}

/// Reads a square matrix and symmetrizes it.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<SymMat> {
    let a = parse_matrix_csv(File::open(path)?)?;
    SymMat::new(a)
}

pub fn write_matrix<W: Write>(writer: W, a: &Array2<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in a.rows() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: impl AsRef<Path>, a: &Array2<f64>) -> Result<()> {
    write_matrix(File::create(path)?, a)
}

/// On-disk description of a model: the covariance lives in a separate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub sigma_path: PathBuf,
    pub support: SupportSet,
    pub k: usize,
    /// Absent when the gap is infinite (`k = p`).
    pub gap: Option<f64>,
    pub label: String,
}

/// Writes `sigma` to `sigma_path` and the description to `json_path`.
pub fn write_model(model: &ModelInstance, json_path: impl AsRef<Path>, sigma_path: impl AsRef<Path>) -> Result<()> {
    write_matrix_csv(&sigma_path, model.sigma.as_array())?;
    let file = ModelFile {
        sigma_path: sigma_path.as_ref().to_path_buf(),
        support: model.support.clone(),
        k: model.k,
        gap: model.gap.is_finite().then_some(model.gap),
        label: model.label.clone(),
    };
    let mut out = File::create(json_path)?;
    serde_json::to_writer_pretty(&mut out, &file)?;
    writeln!(out)?;
    Ok(())
}

/// Reads a model description; a relative `sigma_path` is resolved against
/// the directory of the JSON file.
pub fn read_model(json_path: impl AsRef<Path>) -> Result<ModelInstance> {
    let json_path = json_path.as_ref();
    let file: ModelFile = serde_json::from_reader(File::open(json_path)?)?;
    let sigma_path = if file.sigma_path.is_relative() {
        json_path.parent().unwrap_or(Path::new(".")).join(&file.sigma_path)
    } else {
        file.sigma_path.clone()
    };
    let sigma = read_matrix_csv(sigma_path)?;
    SupportSet::new(file.support.indices().iter().copied(), sigma.dim())?;
    ModelInstance::from_sigma(sigma, file.support, file.k, file.label)
}
