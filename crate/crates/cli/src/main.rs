//! `fps`: solves, diagnostics and synthetic experiments for Fantope
//! projection and selection.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 certification
//! or persistence failure.

mod config;
mod experiments;
mod record;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fps_core::diagnostics::{build_witness, check_theorem1};
use fps_core::io::{read_matrix_csv, write_matrix_csv};
use fps_core::solver::{solve_fps, solve_fps_en};
use fps_core::{FpsError, FpsSolution, SolverConfig, SupportSet};
use serde::Serialize;
use serde_json::json;

use config::{seed_override, summary_beside, ExperimentConfig};
use experiments::{CliqueConfig, SweepOutput};
use record::{write_json, write_records, Summary};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NotConverged(String),
    Certification(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Certification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Certification(m) => write!(f, "certification failed: {m}"),
        }
    }
}

impl From<FpsError> for CliError {
    fn from(e: FpsError) -> Self {
        match e {
            FpsError::NotConverged(_) => CliError::NotConverged(e.to_string()),
            FpsError::SpsViolated { .. } | FpsError::GapCollapsed { .. } => CliError::Certification(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "fps", version, about = "Fantope projection and selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the penalized problem for a covariance matrix read from CSV.
    Solve(SolveArgs),
    /// Support-recovery sweep over sample sizes and dimensions.
    Phase(SweepArgs),
    /// Planted clique recovery.
    Clique(CliqueArgs),
    /// Persistence of the norm-constrained estimator.
    Persist(SweepArgs),
    /// Check the recovery conditions and build the primal-dual witness.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// ADMM step `beta`.
    #[arg(long, default_value_t = 1.0)]
    admm_step: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Residual tolerance before the `sqrt(p)` scaling.
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
    /// Relative diagonal threshold for support extraction.
    #[arg(long, default_value_t = 1e-6)]
    support_tol: f64,
}

impl SolverFlags {
    fn config(&self, k: usize, rho: f64) -> SolverConfig {
        SolverConfig {
            k,
            rho,
            admm_step: self.admm_step,
            max_iters: self.max_iters,
            eps_primal: self.eps,
            eps_dual: self.eps,
            support_tol: self.support_tol,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Square matrix CSV, no header.
    matrix: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    rho: f64,
    /// Elastic-net curvature; zero solves plain FPS.
    #[arg(long, default_value_t = 0.0)]
    tau_en: f64,
    /// Where to write the solution matrix.
    #[arg(long)]
    h_out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config (flat `key = value` file).
    config: PathBuf,
    /// Extra `key=value` entries overriding the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CliqueArgs {
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `c` in `rho = c sqrt(log p / (p - 1))`.
    #[arg(long, default_value_t = fps_core::models::DEFAULT_CLIQUE_MULTIPLE)]
    multiple: f64,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON; defaults to the results path with `.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads; zero lets the pool decide.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Record wall-clock time per trial (otherwise zero, for reproducible output).
    #[arg(long)]
    record_timing: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct CertifyArgs {
    /// Population covariance CSV.
    #[arg(long)]
    sigma: PathBuf,
    /// Input matrix CSV; defaults to the population covariance.
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    /// Comma-separated zero-based indices.
    #[arg(long)]
    support: String,
    #[arg(long)]
    rho: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Phase(a) => cmd_phase(&a),
        Command::Clique(a) => cmd_clique(&a),
        Command::Persist(a) => cmd_persist(&a),
        Command::Certify(a) => cmd_certify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fps: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn read_matrix(path: &Path) -> Result<fps_core::SymMat, CliError> {
    read_matrix_csv(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let s = read_matrix(&a.matrix)?;
    let config = a.solver.config(a.k, a.rho).with_tau(a.tau_en);
    config.validate()?;
    let solve = if a.tau_en > 0.0 { solve_fps_en } else { solve_fps };
    let sol: FpsSolution = match solve(&s, &config) {
        Ok(sol) => sol,
        Err(FpsError::NotConverged(sol)) => *sol,
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &a.h_out {
        write_matrix_csv(path, &sol.h.h).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    print_json(&json!({
        "version": VERSION,
        "config": config,
        "converged": sol.converged,
        "iters": sol.iters,
        "objective": sol.objective,
        "support": sol.support,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "dual_clip": sol.dual_clip,
        "kkt": sol.kkt,
        "h_out": a.h_out,
    }))?;
    if sol.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("{} iterations exhausted", sol.iters)))
    }
}

fn load_config(a: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(&a.config, &a.overrides)?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_sweep<C: Serialize>(
    command: &'static str,
    config: C,
    out: &SweepOutput,
    output: &Path,
    summary: &Path,
) -> Result<(), CliError> {
    write_records(output, &out.records)?;
    write_json(summary, &Summary { command, version: VERSION, config, cells: out.cells.clone() })?;
    for c in &out.cells {
        let n = c.n.map_or("pop".to_string(), |n| n.to_string());
        let head = format!("cell {}: n {n} p {} s {}", c.cell, c.p, c.s);
        match (c.persist_violations, c.radius) {
            (Some(v), Some(r)) => println!(
                "{head} R {r}: sandwich violations {v}/{}, median gap {:.3e}, errors {}",
                c.trials,
                c.median_persist_gap.unwrap_or(f64::NAN),
                c.errors,
            ),
            _ => println!(
                "{head}: recovered {}/{} (frequency {}), not converged {}, errors {}",
                c.recovered,
                c.trials,
                c.recovery_frequency.map_or("-".to_string(), |f| format!("{f:.3}")),
                c.not_converged,
                c.errors,
            ),
        }
    }
    Ok(())
}

fn cmd_phase(a: &SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(a)?;
    if cfg.grid.n.is_empty() && !cfg.population {
        return Err(CliError::input("phase needs a sample-size grid `n` (or `population = true` with `rho`)"));
    }
    let out = experiments::run_phase(&cfg);
    write_sweep("phase", &cfg, &out, &cfg.output, &cfg.summary_path())
}

fn cmd_persist(a: &SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(a)?;
    if let Some(r) = cfg.grid.radius.iter().flatten().find(|&&r| r < cfg.model.k as f64) {
        return Err(CliError::input(format!("radius {r} is below k = {}", cfg.model.k)));
    }
    let out = experiments::run_persist(&cfg);
    write_sweep("persist", &cfg, &out, &cfg.output, &cfg.summary_path())?;
    let violations: Vec<(u32, u32)> =
        out.records.iter().filter(|r| r.persist_ok == Some(false)).map(|r| (r.cell, r.trial)).collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certification(format!("persistence sandwich violated at (cell, trial) {violations:?}")))
    }
}

fn cmd_clique(a: &CliqueArgs) -> Result<(), CliError> {
    if a.s > a.p || a.s == 0 {
        return Err(CliError::input(format!("need 1 <= s <= p, got s = {}, p = {}", a.s, a.p)));
    }
    if a.trials == 0 {
        return Err(CliError::input("trials must be at least 1"));
    }
    let cfg = CliqueConfig {
        p: a.p,
        s: a.s,
        trials: a.trials,
        seed: seed_override()?.unwrap_or(a.seed),
        multiple: a.multiple,
        record_timing: a.record_timing,
        threads: a.threads,
        solver: a.solver.config(1, 0.0),
    };
    let out = experiments::run_clique(&cfg);
    let summary = a.summary.clone().unwrap_or_else(|| summary_beside(&a.out));
    write_sweep("clique", &cfg, &out, &a.out, &summary)
}

fn cmd_certify(a: &CertifyArgs) -> Result<(), CliError> {
    let sigma = read_matrix(&a.sigma)?;
    let s = match &a.sample {
        Some(path) => read_matrix(path)?,
        None => sigma.clone(),
    };
    if s.dim() != sigma.dim() {
        return Err(CliError::input(format!("dimension mismatch: {} vs {}", s.dim(), sigma.dim())));
    }
    let j = SupportSet::parse(&a.support, sigma.dim())?;
    let conditions = check_theorem1(&sigma, &s, a.k, &j, a.rho)?;
    let witness = build_witness(&sigma, &s, a.k, &j, a.rho);
    let (witness_json, witness_valid) = match &witness {
        Ok(w) => (json!(w), w.witness_valid),
        Err(e) => (json!({ "error": e.to_string() }), false),
    };
    print_json(&json!({
        "version": VERSION,
        "conditions": conditions,
        "conditions_hold": conditions.exact_recovery(),
        "witness": witness_json,
    }))?;
    if let Err(e @ FpsError::InvalidInput(_)) = witness {
        return Err(e.into());
    }
    match (witness_valid, conditions.exact_recovery()) {
        (true, true) => Ok(()),
        (w, c) => Err(CliError::Certification(format!("witness valid: {w}, recovery conditions hold: {c}"))),
    }
}
