//! Monte-Carlo sweeps: support recovery, planted clique and persistence.

use std::time::Instant;

use fps_core::diagnostics::{
    check_lcc, check_theorem1, check_theorem2, persistence_gap, prescribed_rho, sigma_hat, support_error,
};
use fps_core::models::{
    clique_rho, gen_planted_clique_with, gen_spiked_with, gen_toy, sample_covariance, sample_gaussian_with,
    ModelInstance,
};
use fps_core::rng::{trial_stream, FpsRng};
use fps_core::solver::solve_fps;
use fps_core::spectral::top_k_projector;
use fps_core::{FpsError, SolverConfig, SupportSet, SymMat};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelKind, SigmaChoice};
use crate::record::{CellSummary, TrialRecord};

/// Grid coordinates of one cell.
#[derive(Debug, Clone, Copy)]
struct Cell {
    index: u32,
    n: Option<usize>,
    p: usize,
    s: usize,
    rho: Option<f64>,
    radius: Option<f64>,
}

fn cells(cfg: &ExperimentConfig, with_radius: bool) -> Vec<Cell> {
    let ns: Vec<Option<usize>> = if cfg.population {
        vec![None]
    } else {
        cfg.grid.n.iter().map(|&n| Some(n)).collect()
    };
    let rhos: Vec<Option<f64>> = match (&cfg.grid.rho, with_radius) {
        (Some(r), false) => r.iter().map(|&x| Some(x)).collect(),
        _ => vec![None],
    };
    let radii: Vec<Option<f64>> = match (&cfg.grid.radius, with_radius) {
        (Some(r), true) => r.iter().map(|&x| Some(x)).collect(),
        (None, true) => vec![Some(2.0 * cfg.model.k as f64)],
        _ => vec![None],
    };
    let mut out = Vec::new();
    for &p in &cfg.grid.p {
        for &s in &cfg.grid.s {
            for &n in &ns {
                for &rho in &rhos {
                    for &radius in &radii {
                        let index = out.len() as u32;
                        out.push(Cell { index, n, p, s, rho, radius });
                    }
                }
            }
        }
    }
    out
}

/// Runs `trial` for every `(cell, trial)` pair; records come back in
/// `(cell, trial)` order whatever the scheduling.
fn run_cells<F>(cells: &[Cell], trials: usize, threads: usize, trial: F) -> Vec<Vec<TrialRecord>>
where
    F: Fn(&Cell, u32) -> TrialRecord + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| {
        cells
            .iter()
            .map(|cell| (0..trials as u32).into_par_iter().map(|t| trial(cell, t)).collect())
            .collect()
    })
}

fn base_record(cell: &Cell, trial: u32, k: usize) -> TrialRecord {
    TrialRecord {
        cell: cell.index,
        trial,
        n: cell.n,
        p: cell.p,
        s: cell.s,
        k,
        rho: cell.rho,
        radius: cell.radius,
        ..Default::default()
    }
}

fn draw_model(cfg: &ExperimentConfig, cell: &Cell, rng: &mut FpsRng) -> fps_core::Result<ModelInstance> {
    let m = &cfg.model;
    match m.kind {
        ModelKind::Spiked => {
            gen_spiked_with(cell.p, m.k, &SupportSet::prefix(cell.s), &m.spikes, m.noise, rng)
        }
        ModelKind::Toy => gen_toy(m.t),
    }
}

fn draw_sample(cfg: &ExperimentConfig, cell: &Cell, model: &ModelInstance, rng: &mut FpsRng) -> fps_core::Result<SymMat> {
    match cell.n {
        None => Ok(model.sigma.clone()),
        Some(n) => sample_covariance(&sample_gaussian_with(&model.sigma, n, cfg.seed, rng)?),
    }
}

fn elapsed_ms(start: Instant, record: bool) -> u64 {
    if record {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

/// Support recovery with the prescribed penalty `(sigma / alpha) sqrt(log p / n)`.
fn phase_trial(cfg: &ExperimentConfig, cell: &Cell, t: u32) -> TrialRecord {
    let start = Instant::now();
    let k = cfg.model.k;
    let mut rec = base_record(cell, t, k);
    let result = (|| -> fps_core::Result<()> {
        let mut rng = trial_stream(cfg.seed, cell.index, t);
        let model = draw_model(cfg, cell, &mut rng)?;
        let s = draw_sample(cfg, cell, &model, &mut rng)?;
        let j = model.support.clone();
        let alpha = check_lcc(&model.sigma, k, &j)?.alpha;
        rec.lcc_alpha = Some(alpha);
        let scale = match cfg.sigma {
            SigmaChoice::Auto => sigma_hat(&s)?,
            SigmaChoice::Fixed(v) => v,
        };
        let rho = match cell.rho {
            Some(r) => r,
            None => {
                let n = cell.n.ok_or_else(|| FpsError::InvalidInput("the prescribed penalty needs a sample size".into()))?;
                if alpha <= 0.0 {
                    return Err(FpsError::InvalidInput("LCC fails (alpha = 0); the prescribed penalty is undefined".into()));
                }
                prescribed_rho(cell.p, n, scale, alpha)
            }
        };
        rec.rho = Some(rho);
        if rho > 0.0 {
            let c1 = check_theorem1(&model.sigma, &s, k, &j, rho)?;
            rec.det_cond1_ok = c1.det_cond1_ok;
            rec.det_cond2_ok = c1.det_cond2_ok;
            rec.signal_ok = c1.signal_ok;
            rec.entrywise_ok = c1.entrywise_min_ok;
        }
        if let (Some(n), true) = (cell.n, alpha > 0.0) {
            rec.sample_size_ok = check_theorem2(&model.sigma, k, &j, n, scale, alpha)?.prob_sample_ok;
        }
        let config = SolverConfig { k, rho, ..cfg.solver };
        let sol = match solve_fps(&s, &config) {
            Ok(sol) => sol,
            Err(FpsError::NotConverged(sol)) => *sol,
            Err(e) => return Err(e),
        };
        let err = support_error(&sol.support, &j);
        rec.converged = sol.converged;
        rec.exact_recovery = Some(err.exact && sol.converged);
        rec.false_pos = Some(err.false_pos);
        rec.false_neg = Some(err.false_neg);
        rec.frob_error = Some(frob(&(&sol.h.h - &model.pi.h)));
        rec.objective = Some(sol.objective);
        rec.iters = Some(sol.iters);
        Ok(())
    })();
    if let Err(e) = result {
        rec.error = e.to_string();
    }
    rec.wall_ms = elapsed_ms(start, cfg.record_timing);
    rec
}

fn persist_trial(cfg: &ExperimentConfig, cell: &Cell, t: u32) -> TrialRecord {
    let start = Instant::now();
    let k = cfg.model.k;
    let mut rec = base_record(cell, t, k);
    let result = (|| -> fps_core::Result<()> {
        let mut rng = trial_stream(cfg.seed, cell.index, t);
        let model = draw_model(cfg, cell, &mut rng)?;
        let s = draw_sample(cfg, cell, &model, &mut rng)?;
        let radius = cell.radius.expect("persistence cells carry a radius");
        let r = persistence_gap(&model.sigma, &s, k, radius, &SolverConfig { k, ..cfg.solver })?;
        rec.converged = true;
        rec.rho = Some(r.rho_emp);
        rec.objective = Some(r.emp_value);
        rec.persist_gap = Some(r.gap);
        rec.persist_bound = Some(r.bound);
        rec.persist_ok = Some(r.ok);
        Ok(())
    })();
    if let Err(e) = result {
        rec.error = e.to_string();
    }
    rec.wall_ms = elapsed_ms(start, cfg.record_timing);
    rec
}

fn frob(a: &ndarray::Array2<f64>) -> f64 {
    fps_core::norms::frobenius(a.view())
}

pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
}

fn finish(per_cell: Vec<Vec<TrialRecord>>) -> SweepOutput {
    let cells = per_cell.iter().filter(|r| !r.is_empty()).map(|r| CellSummary::from_records(r)).collect();
    SweepOutput { records: per_cell.into_iter().flatten().collect(), cells }
}

pub fn run_phase(cfg: &ExperimentConfig) -> SweepOutput {
    let grid = cells(cfg, false);
    finish(run_cells(&grid, cfg.trials, cfg.threads, |cell, t| phase_trial(cfg, cell, t)))
}

pub fn run_persist(cfg: &ExperimentConfig) -> SweepOutput {
    let grid = cells(cfg, true);
    finish(run_cells(&grid, cfg.trials, cfg.threads, |cell, t| persist_trial(cfg, cell, t)))
}

#[derive(Debug, Clone, Serialize)]
pub struct CliqueConfig {
    pub p: usize,
    pub s: usize,
    pub trials: usize,
    pub seed: u64,
    /// `c` in `rho = c sqrt(log p / (p - 1))`.
    pub multiple: f64,
    pub record_timing: bool,
    pub threads: usize,
    pub solver: SolverConfig,
}

pub fn run_clique(cfg: &CliqueConfig) -> SweepOutput {
    let rho = clique_rho(cfg.p, cfg.multiple);
    let cell = Cell { index: 0, n: None, p: cfg.p, s: cfg.s, rho: Some(rho), radius: None };
    let trial = |cell: &Cell, t: u32| {
        let start = Instant::now();
        let mut rec = base_record(cell, t, 1);
        let result = (|| -> fps_core::Result<()> {
            let mut rng = trial_stream(cfg.seed, cell.index, t);
            let clique = gen_planted_clique_with(cfg.p, cfg.s, &mut rng)?;
            let pi = top_k_projector(&clique.sigma, 1)?.point.h;
            match check_theorem1(&clique.sigma, &clique.s, 1, &clique.clique, rho) {
                Ok(c) => {
                    rec.lcc_alpha = Some(c.lcc_alpha);
                    rec.det_cond1_ok = c.det_cond1_ok;
                    rec.det_cond2_ok = c.det_cond2_ok;
                    rec.signal_ok = c.signal_ok;
                    rec.entrywise_ok = c.entrywise_min_ok;
                }
                Err(FpsError::InvalidInput(_)) if rho == 0.0 => {}
                Err(e) => return Err(e),
            }
            let sol = match solve_fps(&clique.s, &SolverConfig { k: 1, rho, ..cfg.solver }) {
                Ok(sol) => sol,
                Err(FpsError::NotConverged(sol)) => *sol,
                Err(e) => return Err(e),
            };
            let err = support_error(&sol.support, &clique.clique);
            rec.converged = sol.converged;
            rec.exact_recovery = Some(err.exact && sol.converged);
            rec.false_pos = Some(err.false_pos);
            rec.false_neg = Some(err.false_neg);
            rec.frob_error = Some(frob(&(&sol.h.h - &pi)));
            rec.objective = Some(sol.objective);
            rec.iters = Some(sol.iters);
            Ok(())
        })();
        if let Err(e) = result {
            rec.error = e.to_string();
        }
        rec.wall_ms = elapsed_ms(start, cfg.record_timing);
        rec
    };
    finish(run_cells(&[cell], cfg.trials, cfg.threads, trial))
}
