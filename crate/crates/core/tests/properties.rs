//! Invariants checked on randomly generated inputs.

mod common;

use common::{frob, jacobi_eigen, objective, random_fantope_point, random_sym, rng};
use fps_core::diagnostics::{check_lcc, check_sps, row_sparsity_bound};
use fps_core::models::{gen_planted_clique, gen_spiked, sample_covariance, sample_gaussian, SampleBatch};
use fps_core::solver::{solve_fps, solve_fps_from, AdmmState, SolverConfig};
use fps_core::spectral::{eig_sym, fantope_project, procrustes_align, waterfill_level, waterfill_mass};
use fps_core::{FantopePoint, FpsError, NumericPolicy, SupportSet, SymMat};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=12).prop_flat_map(|p| (Just(p), 1..=p, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_feasible_and_idempotent((p, k, seed) in dims(), scale in 0.01f64..10.0) {
        let mut r = rng(seed);
        let a = random_sym(p, &mut r).scaled(scale);
        let proj = fantope_project(&a, k).unwrap();
        let policy = NumericPolicy::default();
        prop_assert!(proj.point.is_feasible(&policy));
        let certified = FantopePoint::certify(proj.point.h.clone(), k).unwrap();
        prop_assert!(certified.constraint_residual <= 1e-9 * k as f64);
        let again = fantope_project(&SymMat::new(proj.point.h.clone()).unwrap(), k).unwrap();
        prop_assert!(frob(&(&again.point.h - &proj.point.h)) <= 1e-9);
        let mass = waterfill_mass(proj.clipped_eigenvalues.as_slice().unwrap(), 0.0);
        prop_assert!((mass - k as f64).abs() <= 1e-9 * k as f64);
    }

    #[test]
    fn projection_is_nearest_feasible_point((p, k, seed) in dims()) {
        let mut r = rng(seed);
        let a = random_sym(p, &mut r);
        let proj = fantope_project(&a, k).unwrap().point.h;
        let d = frob(&(a.as_array() - &proj));
        for _ in 0..10 {
            let x = random_fantope_point(p, k, &mut r);
            prop_assert!(frob(&(a.as_array() - &x)) >= d - 1e-9);
            // Variational inequality <A - P, X - P> <= 0.
            prop_assert!(inner(&(a.as_array() - &proj), &(&x - &proj)) <= 1e-9 * (1.0 + a.max_abs()));
        }
    }

    #[test]
    fn waterfill_level_hits_target_mass(gammas in prop::collection::vec(-5.0f64..5.0, 1..30), kfrac in 0.0f64..1.0) {
        let k = 1 + ((gammas.len() - 1) as f64 * kfrac) as usize;
        let theta = waterfill_level(&gammas, k);
        prop_assert!((waterfill_mass(&gammas, theta) - k as f64).abs() <= 1e-9 * k as f64);
    }

    #[test]
    fn procrustes_never_increases_distance(p in 2usize..10, seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = 1 + (seed as usize) % p;
        let (_, a) = jacobi_eigen(&random_sym(p, &mut r));
        let (_, b) = jacobi_eigen(&random_sym(p, &mut r));
        let u = a.slice(ndarray::s![.., ..k]).to_owned();
        let v = b.slice(ndarray::s![.., ..k]).to_owned();
        let al = procrustes_align(&u, &v).unwrap();
        prop_assert!(al.distance <= frob(&(&u - &v)) + 1e-12);
        let oto = al.rotation.t().dot(&al.rotation);
        prop_assert!(frob(&(&oto - &Array2::<f64>::eye(k))) <= 1e-10);
        prop_assert!((frob(&(&u - &v.dot(&al.rotation))) - al.distance).abs() <= 1e-10);
    }

    #[test]
    fn row_sparsity_bound_holds_on_fantope_points((p, k, seed) in dims(), zero_rows in 0usize..6) {
        let mut r = rng(seed);
        let q = p.saturating_sub(zero_rows).max(k);
        let inner = random_fantope_point(q, k, &mut r);
        let mut h = Array2::<f64>::zeros((p, p));
        h.slice_mut(ndarray::s![..q, ..q]).assign(&inner);
        let point = FantopePoint::certify(h, k).unwrap();
        let b = row_sparsity_bound(&point, 1e-10);
        prop_assert!(b.nonzero_rows <= q);
        prop_assert!(b.ok, "l11 {} > bound {}", b.l11, b.bound);
    }

    #[test]
    fn sample_covariance_ignores_location_shifts(p in 1usize..8, n in 2usize..40, seed in any::<u64>()) {
        let mut r = rng(seed);
        let data = Array2::<f64>::from_shape_simple_fn((n, p), || r.sample(StandardNormal));
        let shift = ndarray::Array1::<f64>::from_shape_simple_fn(p, || r.gen_range(-100.0..100.0));
        let shifted = &data + &shift.insert_axis(ndarray::Axis(0));
        let a = sample_covariance(&SampleBatch { n, data, seed }).unwrap();
        let b = sample_covariance(&SampleBatch { n, data: shifted, seed }).unwrap();
        prop_assert!(frob(&(a.as_array() - b.as_array())) <= 1e-9 * (1.0 + a.max_abs()));
    }

    #[test]
    fn block_diagonal_models_have_zero_lcc(s in 1usize..5, extra in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = s + extra;
        // Leading block strictly dominates so the top eigenvector sits in J.
        let top = random_sym(s, &mut r);
        let bottom = random_sym(extra, &mut r);
        let mut sigma = Array2::<f64>::zeros((p, p));
        let shift = 20.0;
        let mut block = top.as_array().clone();
        for i in 0..s { block[[i, i]] += shift; }
        sigma.slice_mut(ndarray::s![..s, ..s]).assign(&block);
        sigma.slice_mut(ndarray::s![s.., s..]).assign(bottom.as_array());
        let sigma = SymMat::new(sigma).unwrap();
        let j = SupportSet::prefix(s);
        let lcc = check_lcc(&sigma, 1, &j).unwrap();
        prop_assert_eq!(lcc.lhs, 0.0);
        prop_assert_eq!(lcc.alpha, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random feasible points never beat the solver, and the recovered dual
    /// gives an upper bound that is nearly tight. Duals have zero diagonal;
    /// the diagonal part of the penalty is exactly `rho * trace H = rho * k`.
    #[test]
    fn objective_is_sandwiched_by_duality((p, k, seed) in dims(), rho in 0.0f64..1.0) {
        let mut r = rng(seed);
        let s = random_sym(p, &mut r);
        let sol = solve_fps(&s, &SolverConfig::new(k, rho));
        // Degenerate random instances occasionally exhaust the iteration
        // budget; the invariants are stated for converged solves.
        prop_assume!(!matches!(sol, Err(FpsError::NotConverged(_))));
        let sol = sol.unwrap();
        let top_sum = |m: &SymMat| eig_sym(m).unwrap().top_sum(k) - rho * k as f64;
        let scale = 1.0 + s.max_abs() * k as f64;
        for _ in 0..20 {
            let x = random_fantope_point(p, k, &mut r);
            prop_assert!(objective(&s, &x, rho) <= sol.objective + 1e-6 * scale);
        }
        let upper = top_sum(&s.sub(&SymMat::new(sol.z.clone() * rho).unwrap()).unwrap());
        prop_assert!(upper >= sol.objective - 1e-6 * scale);
        prop_assert!(upper - sol.objective <= 1e-3 * scale, "duality gap {}", upper - sol.objective);
        // Any other admissible dual variable is also an upper bound.
        let zr = Array2::<f64>::from_shape_fn((p, p), |(i, j)| if i == j { 0.0 } else { ((i * 7 + j * 7 + seed as usize) % 5) as f64 / 4.0 - 0.5 });
        let zr = (&zr + &zr.t()) / 2.0;
        let other = top_sum(&s.sub(&SymMat::new(zr * rho).unwrap()).unwrap());
        prop_assert!(other >= sol.objective - 1e-6 * scale);
    }

    /// With a positive ridge term the optimum is unique, so any starting
    /// point reaches the same matrix.
    #[test]
    fn elastic_net_solution_does_not_depend_on_start((p, k, seed) in dims(), rho in 0.0f64..0.8, tau in 0.2f64..2.0) {
        let mut r = rng(seed);
        let s = random_sym(p, &mut r);
        let config = SolverConfig::new(k, rho).with_tau(tau);
        let a = solve_fps_from(&s, &config, AdmmState::centered(p, k));
        prop_assume!(!matches!(a, Err(FpsError::NotConverged(_))));
        let a = a.unwrap();
        let noise = |r: &mut rand_chacha::ChaCha8Rng| {
            let m = Array2::<f64>::from_shape_simple_fn((p, p), || r.gen_range(-1.0..1.0));
            (&m + &m.t()) / 2.0
        };
        let init = AdmmState { h: random_fantope_point(p, k, &mut r), y: noise(&mut r), u: noise(&mut r) };
        let b = solve_fps_from(&s, &config, init);
        prop_assume!(!matches!(b, Err(FpsError::NotConverged(_))));
        let b = b.unwrap();
        prop_assert!(frob(&(&a.h.h - &b.h.h)) <= 1e-4, "difference {}", frob(&(&a.h.h - &b.h.h)));
    }

    #[test]
    fn spiked_models_report_their_support(p in 4usize..30, seed in any::<u64>()) {
        let s = 2 + (seed as usize) % (p - 2);
        let j = SupportSet::prefix(s);
        let model = gen_spiked(p, 1, &j, &[2.0], 1.0, seed).unwrap();
        let sps = check_sps(&model.sigma, 1).unwrap();
        prop_assert!(sps.reliable);
        prop_assert_eq!(sps.support, j);
        prop_assert!((sps.gap - 2.0).abs() <= 1e-9);
    }
}

#[test]
fn sample_covariance_converges_to_sigma() {
    let model = gen_spiked(6, 2, &SupportSet::prefix(3), &[3.0, 1.5], 1.0, 5).unwrap();
    let mut prev = f64::INFINITY;
    for n in [500, 5000, 50000] {
        let s = sample_covariance(&sample_gaussian(&model, n, 9).unwrap()).unwrap();
        let err = fps_core::models::entrywise_error(&s, &model.sigma).unwrap();
        assert!(err < 6.0 * 3.0 * (1.0 / n as f64).sqrt() * 4.0, "n={n}: {err}");
        prev = prev.min(err);
    }
    assert!(prev < 0.1);
}

/// The closed-form expectation of the clique matrix matches an average over
/// many draws.
#[test]
fn planted_clique_mean_matches_expectation() {
    let (p, s, draws) = (20, 6, 2000);
    let mut mean = Array2::<f64>::zeros((p, p));
    let mut sigma = None;
    for seed in 0..draws {
        let c = gen_planted_clique(p, s, seed).unwrap();
        mean += c.s.as_array();
        sigma.get_or_insert(c.sigma);
    }
    mean /= draws as f64;
    let sigma = sigma.unwrap();
    // Each entry averages a sum of p - 1 unit signs scaled by 1 / (p - 1): sd ~ 1 / sqrt((p - 1) draws).
    let sd = 1.0 / (((p - 1) * draws as usize) as f64).sqrt();
    let err = frob(&(&mean - sigma.as_array())) / p as f64;
    let worst = mean.iter().zip(sigma.as_array().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 6.0 * sd, "worst deviation {worst}, sd {sd}");
    assert!(err < 2.0 * sd);
}
