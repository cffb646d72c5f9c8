//! Per-trial records and per-cell summaries.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// One row of the results CSV. Columns are the field names; fields that do
/// not apply to a command are left empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrialRecord {
    pub cell: u32,
    pub trial: u32,
    pub n: Option<usize>,
    pub p: usize,
    pub s: usize,
    pub k: usize,
    pub rho: Option<f64>,
    pub radius: Option<f64>,
    pub converged: bool,
    pub exact_recovery: Option<bool>,
    pub false_pos: Option<usize>,
    pub false_neg: Option<usize>,
    /// `||H - Pi||_F`.
    pub frob_error: Option<f64>,
    pub objective: Option<f64>,
    pub iters: Option<usize>,
    /// Zero unless timing is requested, so reruns are byte-identical.
    pub wall_ms: u64,
    pub lcc_alpha: Option<f64>,
    pub det_cond1_ok: Option<bool>,
    pub det_cond2_ok: Option<bool>,
    pub signal_ok: Option<bool>,
    pub entrywise_ok: Option<bool>,
    pub sample_size_ok: Option<bool>,
    pub persist_gap: Option<f64>,
    pub persist_bound: Option<f64>,
    pub persist_ok: Option<bool>,
    /// Error text for trials that could not be completed.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: u32,
    pub n: Option<usize>,
    pub p: usize,
    pub s: usize,
    pub rho: Option<f64>,
    pub radius: Option<f64>,
    pub trials: usize,
    pub recovered: usize,
    pub recovery_frequency: Option<f64>,
    pub not_converged: usize,
    pub errors: usize,
    /// Persistence sweeps only.
    pub persist_violations: Option<usize>,
    pub median_persist_gap: Option<f64>,
}

impl CellSummary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let first = &records[0];
        let scored: Vec<bool> = records.iter().filter_map(|r| r.exact_recovery).collect();
        let recovered = scored.iter().filter(|&&x| x).count();
        let gaps: Vec<f64> = records.iter().filter_map(|r| r.persist_gap).collect();
        let persist = records.iter().any(|r| r.persist_ok.is_some());
        CellSummary {
            cell: first.cell,
            n: first.n,
            p: first.p,
            s: first.s,
            rho: first.rho.filter(|_| records.iter().all(|r| r.rho == first.rho)),
            radius: first.radius,
            trials: records.len(),
            recovered,
            recovery_frequency: (!scored.is_empty() && !persist).then(|| recovered as f64 / records.len() as f64),
            not_converged: records.iter().filter(|r| !r.converged && r.error.is_empty()).count(),
            errors: records.iter().filter(|r| !r.error.is_empty()).count(),
            persist_violations: persist.then(|| records.iter().filter(|r| r.persist_ok != Some(true)).count()),
            median_persist_gap: median(&gaps),
        }
    }
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Serialize)]
pub struct Summary<C: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub config: C,
    pub cells: Vec<CellSummary>,
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    for r in records {
        wtr.serialize(r).map_err(|e| CliError::input(e.to_string()))?;
    }
    wtr.flush().map_err(|e| CliError::input(e.to_string()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::input(e.to_string()))?;
    writeln!(f).map_err(|e| CliError::input(e.to_string()))?;
    Ok(())
}
