//! Flat `key = value` experiment configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' anything
//! entry   := key '=' value (',' value)*  [comment]
//! key     := [a-z_]+
//! ```
//!
//! Values are trimmed. A key may appear once. List-valued keys accept one
//! or more comma-separated values; scalar keys accept exactly one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fps_core::SolverConfig;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Spiked,
    Toy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub k: usize,
    /// Spike strengths, descending (spiked model).
    pub spikes: Vec<f64>,
    pub noise: f64,
    /// Off-block coupling of the toy model.
    pub t: f64,
}

/// Tail-bound scale used in the prescribed penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaChoice {
    /// `3 lambda_1(S)`, recomputed per trial.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub s: Vec<usize>,
    /// Explicit penalties; when absent the prescribed penalty is used.
    pub rho: Option<Vec<f64>>,
    /// Constraint radii for the persistence sweep.
    pub radius: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub grid: Grid,
    pub trials: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub summary: Option<PathBuf>,
    pub sigma: SigmaChoice,
    /// Solve with `S = Sigma` instead of a sample covariance.
    pub population: bool,
    pub record_timing: bool,
    /// Worker threads; zero lets the pool decide.
    pub threads: usize,
    pub solver: SolverConfig,
}

const KEYS: &[&str] = &[
    "model",
    "k",
    "spikes",
    "noise",
    "t",
    "n",
    "p",
    "s",
    "rho",
    "radius",
    "trials",
    "seed",
    "output",
    "summary",
    "sigma",
    "population",
    "record_timing",
    "threads",
    "max_iters",
    "eps_primal",
    "eps_dual",
    "admm_step",
    "support_tol",
    "l1_slack",
];

/// Parses the raw entries without interpreting them.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, Vec<String>>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("config line {}: expected `key = value`", no + 1)))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(CliError::input(format!("config line {}: bad key {key:?}", no + 1)));
        }
        let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(|v| v.is_empty()) {
            return Err(CliError::input(format!("config line {}: empty value for {key}", no + 1)));
        }
        if out.insert(key.to_string(), values).is_some() {
            return Err(CliError::input(format!("config line {}: duplicate key {key}", no + 1)));
        }
    }
    Ok(out)
}

struct Entries(BTreeMap<String, Vec<String>>);

impl Entries {
    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(values) = self.0.get(key) else {
            return Ok(None);
        };
        values
            .iter()
            .map(|v| v.parse::<T>().map_err(|_| CliError::input(format!("{key}: cannot parse {v:?}"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.list::<T>(key)? {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(v.pop()),
            Some(_) => Err(CliError::input(format!("{key} takes a single value"))),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file, then applies `key=value` overrides.
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_with_overrides(&text, overrides)
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_entries(parse_entries(text)?)
    }

    /// Applies `key=value` overrides on top of a parsed file.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut entries = parse_entries(text)?;
        for o in overrides {
            let single = parse_entries(o)?;
            entries.extend(single);
        }
        Self::from_entries(entries)
    }

    fn from_entries(map: BTreeMap<String, Vec<String>>) -> Result<Self, CliError> {
        if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::input(format!("unknown config key {bad:?}")));
        }
        let e = Entries(map);
        let kind = match e.scalar::<String>("model")?.as_deref() {
            None | Some("spiked") => ModelKind::Spiked,
            Some("toy") => ModelKind::Toy,
            Some(other) => return Err(CliError::input(format!("unknown model {other:?} (spiked or toy)"))),
        };
        let k = e.scalar("k")?.unwrap_or(1);
        let spikes = e.list("spikes")?.unwrap_or_else(|| vec![2.0; k]);
        let model = ModelSpec {
            kind,
            k,
            spikes,
            noise: e.scalar("noise")?.unwrap_or(1.0),
            t: e.scalar("t")?.unwrap_or(0.0),
        };
        let (p_default, s_default) = match kind {
            ModelKind::Toy => (vec![3], vec![2]),
            ModelKind::Spiked => (vec![], vec![]),
        };
        let grid = Grid {
            n: e.list("n")?.unwrap_or_default(),
            p: e.list("p")?.unwrap_or(p_default),
            s: e.list("s")?.unwrap_or(s_default),
            rho: e.list("rho")?,
            radius: e.list("radius")?,
        };
        let sigma = match e.scalar::<String>("sigma")?.as_deref() {
            None | Some("auto") => SigmaChoice::Auto,
            Some(v) => SigmaChoice::Fixed(
                v.parse()
                    .map_err(|_| CliError::input(format!("sigma: expected `auto` or a number, got {v:?}")))?,
            ),
        };
        let mut solver = SolverConfig::new(k, 0.0);
        if let Some(v) = e.scalar("max_iters")? {
            solver.max_iters = v;
        }
        if let Some(v) = e.scalar("eps_primal")? {
            solver.eps_primal = v;
        }
        if let Some(v) = e.scalar("eps_dual")? {
            solver.eps_dual = v;
        }
        if let Some(v) = e.scalar("admm_step")? {
            solver.admm_step = v;
        }
        if let Some(v) = e.scalar("support_tol")? {
            solver.support_tol = v;
        }
        if let Some(v) = e.scalar("l1_slack")? {
            solver.l1_slack = v;
        }
        let cfg = ExperimentConfig {
            model,
            grid,
            trials: e.scalar("trials")?.unwrap_or(1),
            seed: e.scalar("seed")?.unwrap_or(0),
            output: e
                .scalar::<String>("output")?
                .map(PathBuf::from)
                .ok_or_else(|| CliError::input("config needs an `output` path"))?,
            summary: e.scalar::<String>("summary")?.map(PathBuf::from),
            sigma,
            population: e.scalar("population")?.unwrap_or(false),
            record_timing: e.scalar("record_timing")?.unwrap_or(false),
            threads: e.scalar("threads")?.unwrap_or(0),
            solver,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        if self.trials == 0 {
            return Err(CliError::input("trials must be at least 1"));
        }
        if g.p.is_empty() || g.s.is_empty() {
            return Err(CliError::input("grid needs non-empty `p` and `s` lists"));
        }
        if g.n.is_empty() && !self.population {
            return Err(CliError::input("grid needs a non-empty `n` list (or population = true)"));
        }
        if g.rho.as_ref().is_some_and(|r| r.is_empty() || r.iter().any(|&x| !(x >= 0.0 && x.is_finite()))) {
            return Err(CliError::input("rho values must be finite and non-negative"));
        }
        if let Some(r) = &g.radius {
            if r.iter().any(|&x| x < self.model.k as f64) {
                return Err(CliError::input(format!("every radius must be at least k = {}", self.model.k)));
            }
        }
        if self.model.kind == ModelKind::Toy && (g.p != [3] || g.s != [2] || self.model.k != 1) {
            return Err(CliError::input("the toy model has p = 3, s = 2, k = 1"));
        }
        if self.model.kind == ModelKind::Spiked && self.model.spikes.len() != self.model.k {
            return Err(CliError::input(format!(
                "spikes needs k = {} values, got {}",
                self.model.k,
                self.model.spikes.len()
            )));
        }
        if let SigmaChoice::Fixed(v) = self.sigma {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input("sigma must be positive"));
            }
        }
        self.solver.validate().map_err(|e| CliError::input(e.to_string()))
    }

    /// Summary path: configured, or the output path with `.summary.json`.
    pub fn summary_path(&self) -> PathBuf {
        self.summary.clone().unwrap_or_else(|| summary_beside(&self.output))
    }
}

pub fn summary_beside(output: &Path) -> PathBuf {
    output.with_extension("summary.json")
}

/// `FPS_SEED`, when set, replaces the configured seed.
pub fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var("FPS_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("FPS_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
