use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fps_core::diagnostics::{check_lcc, check_theorem2};
use fps_core::io::{read_matrix_csv, write_matrix_csv};
use fps_core::models::{gen_spiked_with, gen_toy};
use fps_core::rng::trial_stream;
use fps_core::spectral::top_k_projector;
use fps_core::SupportSet;
use serde_json::Value;
use tempfile::TempDir;

fn fps(args: &[&str]) -> Output {
    fps_env(args, None)
}

fn fps_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fps"));
    cmd.args(args).env_remove("FPS_SEED");
    if let Some(s) = seed {
        cmd.env("FPS_SEED", s);
    }
    cmd.output().expect("run fps")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn toy_csv(dir: &Path, t: f64) -> PathBuf {
    let path = dir.join(format!("toy_{t}.csv"));
    write_matrix_csv(&path, gen_toy(t).unwrap().sigma.as_array()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn summary(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn frequencies(summary: &Value) -> Vec<f64> {
    summary["cells"].as_array().unwrap().iter().map(|c| c["recovery_frequency"].as_f64().unwrap()).collect()
}

#[test]
fn solve_toy_recovers_leading_pair() {
    let dir = TempDir::new().unwrap();
    let m = toy_csv(dir.path(), 0.0);
    let out = fps(&["solve", s(&m), "--k", "1", "--rho", "0.05"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["support"], serde_json::json!([0, 1]));
    assert_eq!(v["converged"], true);
    assert!(v["kkt"]["sign_mismatch"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn solve_without_penalty_writes_the_top_projector() {
    let dir = TempDir::new().unwrap();
    let m = toy_csv(dir.path(), 0.1);
    let h_out = dir.path().join("h.csv");
    let out = fps(&["solve", s(&m), "--k", "2", "--rho", "0", "--h-out", s(&h_out)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let h = read_matrix_csv(&h_out).unwrap();
    let pi = top_k_projector(&gen_toy(0.1).unwrap().sigma, 2).unwrap().point.h;
    let err = (h.as_array() - &pi).iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err <= 1e-5, "distance {err}");
}

#[test]
fn solve_rejects_bad_matrices() {
    let dir = TempDir::new().unwrap();
    let rect = write(dir.path(), "rect.csv", "1,0,0\n0,1,0\n");
    let ragged = write(dir.path(), "ragged.csv", "1,0\n0\n");
    let text = write(dir.path(), "text.csv", "1,x\n0,1\n");
    for m in [&rect, &ragged, &text] {
        let out = fps(&["solve", s(m), "--k", "1", "--rho", "0.1"]);
        assert_eq!(code(&out), 1, "{}", m.display());
        assert!(!out.stderr.is_empty());
    }
    let out = fps(&["solve", s(&dir.path().join("missing.csv")), "--k", "1", "--rho", "0.1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn solve_reports_exhausted_budget() {
    let dir = TempDir::new().unwrap();
    // Two iterations from the centered start are far from optimal here; the
    // toy model is already solved by then.
    let entry = |i: usize, j: usize| {
        let (i, j) = (i.min(j), i.max(j));
        let mix = if i == j { 0.0 } else { 0.3 * ((7 * i + 7 * j + i * j) % 5) as f64 / 5.0 };
        1.0 / (1.0 + (j - i) as f64) + mix
    };
    let rows: Vec<String> = (0..8)
        .map(|i| (0..8).map(|j| entry(i, j).to_string()).collect::<Vec<_>>().join(","))
        .collect();
    let m = write(dir.path(), "band.csv", &(rows.join("\n") + "\n"));
    let out = fps(&["solve", s(&m), "--k", "2", "--rho", "0.1", "--max-iters", "2"]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["converged"], false);
}

#[test]
fn certify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let clean = toy_csv(dir.path(), 0.0);
    let out = fps(&["certify", "--sigma", s(&clean), "--k", "1", "--support", "0,1", "--rho", "0.004"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    assert_eq!(v["witness"]["witness_valid"], true);
    assert_eq!(v["conditions_hold"], true);

    // Clause on the penalty fails at 0.01 although the witness is valid.
    let out = fps(&["certify", "--sigma", s(&clean), "--k", "1", "--support", "0,1", "--rho", "0.01"]);
    assert_eq!(code(&out), 3);
    assert_eq!(stdout_json(&out)["witness"]["witness_valid"], true);

    // Cross-covariance breaks LCC.
    let noisy = toy_csv(dir.path(), 0.1);
    let out = fps(&["certify", "--sigma", s(&noisy), "--k", "1", "--support", "0,1", "--rho", "0.004"]);
    assert_eq!(code(&out), 3);
    assert!(stdout_json(&out)["conditions"]["det_cond1_ok"] == false);

    let out = fps(&["certify", "--sigma", s(&clean), "--k", "1", "--support", "0,7", "--rho", "0.004"]);
    assert_eq!(code(&out), 1);
}

const PHASE_SMALL: &str = "\
# toy model, two sample sizes
model = toy
t = 0
n = 200, 800
rho = 0.02
trials = 1
seed = 11
";

#[test]
fn phase_is_reproducible_and_uses_record_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "phase.cfg", &format!("{PHASE_SMALL}output = {}\n", s(&dir.path().join("a.csv"))));
    let out = fps(&["phase", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.path().join("a.csv")).unwrap();
    let out = fps(&["phase", s(&cfg)]);
    assert_eq!(code(&out), 0);
    assert_eq!(first, std::fs::read(dir.path().join("a.csv")).unwrap());

    let header = csv::Reader::from_path(dir.path().join("a.csv")).unwrap().headers().unwrap().clone();
    let expected = [
        "cell", "trial", "n", "p", "s", "k", "rho", "radius", "converged", "exact_recovery", "false_pos", "false_neg",
        "frob_error", "objective", "iters", "wall_ms", "lcc_alpha", "det_cond1_ok", "det_cond2_ok", "signal_ok",
        "entrywise_ok", "sample_size_ok", "persist_gap", "persist_bound", "persist_ok", "error",
    ];
    assert_eq!(header.iter().collect::<Vec<_>>(), expected);
    assert_eq!(csv_rows(&dir.path().join("a.csv")).len(), 2);

    let sum = summary(&dir.path().join("a.summary.json"));
    assert_eq!(sum["command"], "phase");
    assert_eq!(sum["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(sum["config"]["seed"], 11);
    assert_eq!(sum["config"]["solver"]["max_iters"], 20000);
}

#[test]
fn seed_environment_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "phase.cfg", &format!("{PHASE_SMALL}output = {}\n", s(&dir.path().join("a.csv"))));
    let out = fps_env(&["phase", s(&cfg)], Some("12"));
    assert_eq!(code(&out), 0);
    assert_eq!(summary(&dir.path().join("a.summary.json"))["config"]["seed"], 12);
    let with_env = std::fs::read(dir.path().join("a.csv")).unwrap();
    let out = fps(&["phase", s(&cfg), "--set", "seed=12"]);
    assert_eq!(code(&out), 0);
    assert_eq!(with_env, std::fs::read(dir.path().join("a.csv")).unwrap());
    let bad = fps_env(&["phase", s(&cfg)], Some("twelve"));
    assert_eq!(code(&bad), 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("o.csv");
    for text in ["p = 10\ns = 2\nn = 100\ntrials = 0\n", "p = 10\ns = 2\nn = 100\nbogus = 1\n", "p = 10\ns = 2\nn = 100\nn = 200\n"] {
        let cfg = write(dir.path(), "bad.cfg", &format!("{text}output = {}\n", s(&out_path)));
        assert_eq!(code(&fps(&["phase", s(&cfg)])), 1, "{text}");
    }
    let cfg = write(dir.path(), "r.cfg", &format!("p = 10\ns = 2\nk = 2\nspikes = 3, 2\nn = 100\nradius = 1\noutput = {}\n", s(&out_path)));
    assert_eq!(code(&fps(&["persist", s(&cfg)])), 1);
}

/// Sample size at which `s sqrt(log p / n)` meets the sample-size condition,
/// with the population stand-in `3 lambda_1(Sigma)` for the scale.
fn sample_size_threshold(p: usize, s: usize, seed: u64) -> f64 {
    let mut rng = trial_stream(seed, 0, 0);
    let j = SupportSet::prefix(s);
    let m = gen_spiked_with(p, 1, &j, &[2.0], 1.0, &mut rng).unwrap();
    let alpha = check_lcc(&m.sigma, 1, &j).unwrap().alpha;
    let scale = 3.0 * m.eigenvalues[0];
    let r = check_theorem2(&m.sigma, 1, &j, 1000, scale, alpha).unwrap();
    1000.0 * (r.prob_sample_lhs.unwrap() / r.prob_sample_rhs.unwrap()).powi(2)
}

#[test]
fn phase_recovery_does_not_degrade_with_more_samples() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("phase.csv");
    let cfg = write(
        dir.path(),
        "phase.cfg",
        &format!("p = 100\ns = 5\nk = 1\nspikes = 2\nn = 500, 2000, 8000\ntrials = 20\nseed = 5\noutput = {}\n", s(&out_path)),
    );
    let out = fps(&["phase", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&out_path).len(), 60);
    let f = frequencies(&summary(&out_path.with_extension("summary.json")));
    assert!(f.windows(2).all(|w| w[0] <= w[1]), "{f:?}");
    // Far below the sample-size condition, recovery is rare.
    assert!(500.0 * 100.0 <= sample_size_threshold(100, 5, 5));
    assert!(f[0] <= 0.5, "{f:?}");
}

#[test]
fn persist_population_gap_vanishes() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("pop.csv");
    let cfg = write(
        dir.path(),
        "pop.cfg",
        &format!("p = 15\ns = 3\nk = 1\nspikes = 2\npopulation = true\nradius = 2, 3\ntrials = 2\noutput = {}\n", s(&out_path)),
    );
    let out = fps(&["persist", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out_path);
    assert_eq!(rows.len(), 4);
    let header = csv::Reader::from_path(&out_path).unwrap().headers().unwrap().clone();
    let gap_col = header.iter().position(|h| h == "persist_gap").unwrap();
    for r in rows {
        let gap: f64 = r[gap_col].parse().unwrap();
        assert!(gap.abs() <= 1e-6, "{gap}");
    }
}

#[test]
fn persist_sandwich_and_sample_size_trend() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("gauss.csv");
    let cfg = write(
        dir.path(),
        "gauss.cfg",
        &format!("p = 50\ns = 5\nk = 1\nspikes = 2\nn = 2000, 4000\nradius = 2\ntrials = 20\nseed = 5\noutput = {}\n", s(&out_path)),
    );
    // Exit 0 means every row satisfied -1e-6 <= gap <= bound + 1e-4.
    let out = fps(&["persist", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let sum = summary(&out_path.with_extension("summary.json"));
    let cells = sum["cells"].as_array().unwrap();
    assert!(cells.iter().all(|c| c["persist_violations"] == 0 && c["errors"] == 0));
    let m: Vec<f64> = cells.iter().map(|c| c["median_persist_gap"].as_f64().unwrap()).collect();
    let ratio = m[1] / m[0];
    assert!((0.25..=0.75).contains(&ratio), "median gaps {m:?}");
}

#[test]
fn clique_full_support_is_trivial() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("clique.csv");
    let out = fps(&["clique", "--p", "30", "--s", "30", "--trials", "3", "--seed", "2", "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sum = summary(&out_path.with_extension("summary.json"));
    assert_eq!(frequencies(&sum), vec![1.0]);
    assert_eq!(sum["config"]["multiple"], 0.9);

    let out = fps(&["clique", "--p", "30", "--s", "31", "--out", s(&out_path)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn clique_large_clique_is_found_small_is_not() {
    let dir = TempDir::new().unwrap();
    let big = dir.path().join("big.csv");
    let small = dir.path().join("small.csv");
    let out = fps(&["clique", "--p", "120", "--s", "30", "--trials", "5", "--seed", "8", "--out", s(&big)]);
    assert_eq!(code(&out), 0);
    let out = fps(&["clique", "--p", "120", "--s", "4", "--trials", "5", "--seed", "8", "--out", s(&small)]);
    assert_eq!(code(&out), 0);
    let fb = frequencies(&summary(&big.with_extension("summary.json")))[0];
    let fs = frequencies(&summary(&small.with_extension("summary.json")))[0];
    assert!(fb >= 0.8 && fs <= 0.2, "big {fb}, small {fs}");
}
