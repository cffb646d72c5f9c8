//! Checks of the support-recovery conditions against a known population
//! covariance, the primal-dual witness certificate, and the persistence and
//! stability bounds for the norm-constrained estimator.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{FpsError, Result};
use crate::linalg;
use crate::policy::NumericPolicy;
use crate::solver::{self, SolverConfig};
use crate::spectral::{self, eig_sym_with, procrustes_align_with, FantopePoint, Spectrum, SymMat};
use crate::support::SupportSet;

/// Dual-feasibility slack used by the witness certificate.
pub const DUAL_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SpsReport {
    /// `lambda_k - lambda_{k+1}` of `Sigma`; infinite when `k = p`.
    pub gap: f64,
    /// `{i : Pi_ii > support_tol}`.
    pub support: SupportSet,
    /// False when the gap is at or below the gap tolerance, in which case
    /// `Pi` and its support are not well defined.
    pub reliable: bool,
}

pub fn check_sps(sigma: &SymMat, k: usize) -> Result<SpsReport> {
    check_sps_with(sigma, k, &NumericPolicy::default())
}

pub fn check_sps_with(sigma: &SymMat, k: usize, policy: &NumericPolicy) -> Result<SpsReport> {
    let pop = Population::new(sigma, k, policy)?;
    Ok(SpsReport { gap: pop.gap, support: pop.support.clone(), reliable: pop.gap > policy.gap_tol })
}

/// Spectral quantities of `Sigma` shared by the checks.
struct Population {
    spec: Spectrum,
    gap: f64,
    pi: Array2<f64>,
    support: SupportSet,
}

impl Population {
    fn new(sigma: &SymMat, k: usize, policy: &NumericPolicy) -> Result<Self> {
        let p = sigma.dim();
        if k == 0 || k > p {
            return Err(FpsError::invalid(format!("k must satisfy 0 < k <= p = {p}, got {k}")));
        }
        let spec = eig_sym_with(sigma, policy)?;
        let basis = spec.leading(k);
        let pi = basis.dot(&basis.t());
        let support = SupportSet::from_sorted_unchecked((0..p).filter(|&i| pi[[i, i]] > policy.support_tol).collect());
        Ok(Population { gap: spec.gap(k), spec, pi, support })
    }

    fn lambda1(&self) -> f64 {
        self.spec.eigenvalues[0]
    }

    fn require_gap(&self, policy: &NumericPolicy) -> Result<()> {
        if self.gap > policy.gap_tol {
            Ok(())
        } else {
            Err(FpsError::SpsViolated { gap: self.gap })
        }
    }
}

fn check_support_range(j: &SupportSet, p: usize) -> Result<()> {
    match j.indices().last() {
        Some(&last) if last >= p => Err(FpsError::invalid(format!("support {j} exceeds dimension {p}"))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LccReport {
    /// `(8 s / gap) ||Sigma_{J^c J}||_{2,inf}`.
    pub lhs: f64,
    /// `max(0, 1 - lhs)`.
    pub alpha: f64,
}

pub fn check_lcc(sigma: &SymMat, k: usize, j: &SupportSet) -> Result<LccReport> {
    check_lcc_with(sigma, k, j, &NumericPolicy::default())
}

pub fn check_lcc_with(sigma: &SymMat, k: usize, j: &SupportSet, policy: &NumericPolicy) -> Result<LccReport> {
    check_support_range(j, sigma.dim())?;
    let pop = Population::new(sigma, k, policy)?;
    pop.require_gap(policy)?;
    Ok(lcc_from(sigma, j, pop.gap))
}

fn lcc_from(sigma: &SymMat, j: &SupportSet, gap: f64) -> LccReport {
    let cross = cross_row_norm(sigma, j);
    let lhs = if cross == 0.0 { 0.0 } else { 8.0 * j.len() as f64 / gap * cross };
    LccReport { lhs, alpha: (1.0 - lhs).clamp(0.0, 1.0) }
}

/// `||Sigma_{J^c J}||_{2,inf}`: largest Euclidean norm over the rows `i` not in `J`
/// of `(Sigma_ij)_{j in J}`.
fn cross_row_norm(sigma: &SymMat, j: &SupportSet) -> f64 {
    let rows = j.complement(sigma.dim());
    linalg::max_row_norm(linalg::submatrix(sigma.view(), &rows, j.indices()).view())
}

/// `sign(M_JJ) = b b^T` for some `b` in `{-1, 1}^s`. Any entry with
/// `|M_ij| <= 1e-12` counts as a zero sign and fails the test.
pub fn sign_rank_one(m: &SymMat, j: &SupportSet) -> bool {
    sign_rank_one_tol(m, j, NumericPolicy::default().sign_zero_tol)
}

fn sign_rank_one_tol(m: &SymMat, j: &SupportSet, zero_tol: f64) -> bool {
    let idx = j.indices();
    let Some(&first) = idx.first() else {
        return true;
    };
    let sign = |a: usize, b: usize| {
        let v = m.get(a, b);
        if v.abs() <= zero_tol {
            0.0
        } else {
            v.signum()
        }
    };
    // b_0 = 1 fixes the global sign; row 0 then determines b.
    if sign(first, first) != 1.0 {
        return false;
    }
    let b: Vec<f64> = idx.iter().map(|&i| sign(first, i)).collect();
    if b.contains(&0.0) {
        return false;
    }
    idx.iter()
        .enumerate()
        .all(|(x, &a)| idx.iter().enumerate().all(|(y, &c)| sign(a, c) == b[x] * b[y]))
}

/// Numerical evaluation of the recovery conditions. Clauses that need
/// inputs the caller did not supply are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub rho: Option<f64>,
    pub sps_gap: f64,
    pub sps_support: SupportSet,
    pub sps_reliable: bool,
    pub lambda_1: f64,
    pub lcc_lhs: f64,
    pub lcc_alpha: f64,
    /// `||S - Sigma||_{inf,inf} / rho + lcc_lhs`; must be `<= 1`.
    pub det_cond1_lhs: Option<f64>,
    pub det_cond1_ok: Option<bool>,
    /// `gap - 4 rho s (1 + 8 lambda_1 / gap)`; must be `> 0`.
    pub det_cond2_slack: Option<f64>,
    pub det_cond2_ok: Option<bool>,
    /// `min_{j in J} sqrt(Pi_jj)`.
    pub signal_min_leverage: f64,
    /// `4 rho s / gap`.
    pub signal_bound: Option<f64>,
    pub signal_ok: Option<bool>,
    /// `min_{i,j in J} |Sigma_ij|`.
    pub entrywise_min: f64,
    pub sign_rank_one: bool,
    /// `entrywise_min > 2 rho` and `sign_rank_one`.
    pub entrywise_min_ok: Option<bool>,
    /// `s sqrt(log p / n)`.
    pub prob_sample_lhs: Option<f64>,
    /// `alpha gap^2 / (4 sigma (8 lambda_1 + gap))`.
    pub prob_sample_rhs: Option<f64>,
    pub prob_sample_ok: Option<bool>,
    /// Prescribed penalty `(sigma / alpha) sqrt(log p / n)`.
    pub prob_rho: Option<f64>,
    pub prob_signal_ok: Option<bool>,
    pub prob_entrywise_ok: Option<bool>,
}

impl ConditionReport {
    fn base(sigma: &SymMat, k: usize, j: &SupportSet, policy: &NumericPolicy) -> Result<(Self, Population)> {
        let p = sigma.dim();
        check_support_range(j, p)?;
        let pop = Population::new(sigma, k, policy)?;
        pop.require_gap(policy)?;
        let lcc = lcc_from(sigma, j, pop.gap);
        let idx = j.indices();
        let signal_min_leverage = idx.iter().map(|&i| pop.pi[[i, i]].max(0.0).sqrt()).fold(f64::INFINITY, f64::min);
        let mut entrywise_min = f64::INFINITY;
        for &a in idx {
            for &b in idx {
                entrywise_min = entrywise_min.min(sigma.get(a, b).abs());
            }
        }
        let report = ConditionReport {
            k,
            s: j.len(),
            p,
            rho: None,
            sps_gap: pop.gap,
            sps_support: pop.support.clone(),
            sps_reliable: true,
            lambda_1: pop.lambda1(),
            lcc_lhs: lcc.lhs,
            lcc_alpha: lcc.alpha,
            det_cond1_lhs: None,
            det_cond1_ok: None,
            det_cond2_slack: None,
            det_cond2_ok: None,
            signal_min_leverage,
            signal_bound: None,
            signal_ok: None,
            entrywise_min,
            sign_rank_one: sign_rank_one_tol(sigma, j, policy.sign_zero_tol),
            entrywise_min_ok: None,
            prob_sample_lhs: None,
            prob_sample_rhs: None,
            prob_sample_ok: None,
            prob_rho: None,
            prob_signal_ok: None,
            prob_entrywise_ok: None,
        };
        Ok((report, pop))
    }

    fn fill_penalty_clauses(&mut self, rho: f64) {
        let s = self.s as f64;
        let gap = self.sps_gap;
        let slack = gap - 4.0 * rho * s * (1.0 + 8.0 * self.lambda_1 / gap);
        self.det_cond2_slack = Some(slack);
        self.det_cond2_ok = Some(slack > 0.0);
        let bound = 4.0 * rho * s / gap;
        self.signal_bound = Some(bound);
        self.signal_ok = Some(self.signal_min_leverage > bound);
        self.entrywise_min_ok = Some(self.entrywise_min > 2.0 * rho && self.sign_rank_one);
    }

    /// Conditions guaranteeing a unique solution with no false positives.
    pub fn no_false_positives(&self) -> bool {
        self.det_cond1_ok == Some(true) && self.det_cond2_ok == Some(true)
    }

    /// All deterministic clauses for exact support recovery.
    pub fn exact_recovery(&self) -> bool {
        self.no_false_positives() && (self.signal_ok == Some(true) || self.entrywise_min_ok == Some(true))
    }
}

/// Deterministic recovery conditions for input `S` at penalty `rho`.
pub fn check_theorem1(sigma: &SymMat, s: &SymMat, k: usize, j: &SupportSet, rho: f64) -> Result<ConditionReport> {
    check_theorem1_with(sigma, s, k, j, rho, &NumericPolicy::default())
}

pub fn check_theorem1_with(
    sigma: &SymMat,
    s: &SymMat,
    k: usize,
    j: &SupportSet,
    rho: f64,
    policy: &NumericPolicy,
) -> Result<ConditionReport> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(FpsError::invalid(format!("rho must be positive, got {rho}")));
    }
    if s.dim() != sigma.dim() {
        return Err(FpsError::invalid(format!("dimension mismatch: {} vs {}", s.dim(), sigma.dim())));
    }
    let (mut report, _) = ConditionReport::base(sigma, k, j, policy)?;
    report.rho = Some(rho);
    let w = linalg::max_abs((s.as_array() - sigma.as_array()).view());
    let cond1 = w / rho + report.lcc_lhs;
    report.det_cond1_lhs = Some(cond1);
    report.det_cond1_ok = Some(cond1 <= 1.0);
    report.fill_penalty_clauses(rho);
    Ok(report)
}

/// Sample-size condition and prescribed penalty for `n` observations whose
/// sample covariance obeys `||S - Sigma||_{inf,inf} <= sigma_scale sqrt(log p / n)`.
///
/// The clauses depending on the penalty are evaluated at the prescribed
/// `rho`; the clause depending on `S` is left empty.
pub fn check_theorem2(
    sigma: &SymMat,
    k: usize,
    j: &SupportSet,
    n: usize,
    sigma_scale: f64,
    alpha: f64,
) -> Result<ConditionReport> {
    check_theorem2_with(sigma, k, j, n, sigma_scale, alpha, &NumericPolicy::default())
}

pub fn check_theorem2_with(
    sigma: &SymMat,
    k: usize,
    j: &SupportSet,
    n: usize,
    sigma_scale: f64,
    alpha: f64,
    policy: &NumericPolicy,
) -> Result<ConditionReport> {
    let p = sigma.dim() as f64;
    if n == 0 || (n as f64) < p.ln() {
        return Err(FpsError::invalid(format!("need n >= log p, got n = {n}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FpsError::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(sigma_scale > 0.0 && sigma_scale.is_finite()) {
        return Err(FpsError::invalid(format!("sigma scale must be positive, got {sigma_scale}")));
    }
    let (mut report, _) = ConditionReport::base(sigma, k, j, policy)?;
    let rate = (p.ln() / n as f64).sqrt();
    let gap = report.sps_gap;
    let lhs = report.s as f64 * rate;
    let rhs = alpha * gap * gap / (4.0 * sigma_scale * (8.0 * report.lambda_1 + gap));
    let rho = sigma_scale / alpha * rate;
    report.rho = Some(rho);
    report.prob_sample_lhs = Some(lhs);
    report.prob_sample_rhs = Some(rhs);
    report.prob_sample_ok = Some(lhs < rhs);
    report.prob_rho = Some(rho);
    report.fill_penalty_clauses(rho);
    report.prob_signal_ok = report.signal_ok;
    report.prob_entrywise_ok = report.entrywise_min_ok;
    Ok(report)
}

/// `sigma_hat = 3 lambda_1(S)`, the default plug-in for the tail-bound scale.
pub fn sigma_hat(s: &SymMat) -> Result<f64> {
    Ok(3.0 * spectral::eigenvalues_with(s, &NumericPolicy::default())?[0])
}

/// `(sigma / alpha) sqrt(log p / n)`.
pub fn prescribed_rho(p: usize, n: usize, sigma_scale: f64, alpha: f64) -> f64 {
    sigma_scale / alpha * ((p as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrobeniusCheck {
    /// `||H - Pi||_F`.
    pub lhs: f64,
    /// `4 rho s / gap`.
    pub rhs: f64,
    pub ok: bool,
    /// Whether `rho >= ||S - Sigma||_{inf,inf}`, the regime of the bound.
    pub in_regime: bool,
}

pub fn frobenius_bound_check(
    sigma: &SymMat,
    s: &SymMat,
    k: usize,
    j: &SupportSet,
    rho: f64,
    sol: &solver::FpsSolution,
) -> Result<FrobeniusCheck> {
    let policy = sol.config.policy;
    check_support_range(j, sigma.dim())?;
    if s.dim() != sigma.dim() || sol.h.dim() != sigma.dim() {
        return Err(FpsError::invalid("dimension mismatch between Sigma, S and the solution"));
    }
    let pop = Population::new(sigma, k, &policy)?;
    pop.require_gap(&policy)?;
    let lhs = linalg::frobenius((&sol.h.h - &pop.pi).view());
    let rhs = 4.0 * rho * j.len() as f64 / pop.gap;
    let w = linalg::max_abs((s.as_array() - sigma.as_array()).view());
    Ok(FrobeniusCheck { lhs, rhs, ok: lhs <= rhs + 1e-6, in_regime: rho >= w })
}

/// `||H||_{1,1}` against `k ||H||_{2,0}`, the row-sparsity bound for Fantope points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RowSparsityBound {
    pub l11: f64,
    pub nonzero_rows: usize,
    pub bound: f64,
    pub ok: bool,
}

pub fn row_sparsity_bound(h: &FantopePoint, row_tol: f64) -> RowSparsityBound {
    let l11 = h.l11();
    let rows = h.h.rows().into_iter().filter(|r| r.dot(r).sqrt() > row_tol).count();
    let bound = h.k as f64 * rows as f64;
    // Relative slack covers summation round-off only.
    RowSparsityBound { l11, nonzero_rows: rows, bound, ok: l11 <= bound * (1.0 + 1e-12) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupportError {
    pub false_pos: usize,
    pub false_neg: usize,
    pub exact: bool,
}

pub fn support_error(est: &SupportSet, truth: &SupportSet) -> SupportError {
    let false_pos = est.indices().iter().filter(|&&i| !truth.contains(i)).count();
    let false_neg = truth.indices().iter().filter(|&&i| !est.contains(i)).count();
    SupportError { false_pos, false_neg, exact: false_pos == 0 && false_neg == 0 }
}

/// Primal-dual witness for the support-restricted solution.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    /// Solution of the problem restricted to `J`, embedded in `p x p`.
    pub htilde: FantopePoint,
    pub rho: f64,
    /// `||Q - I||_F` for the aligned rotation with `Q U_J = U_hat_J`.
    pub q_deviation: f64,
    /// `8 rho s / gap`.
    pub q_bound: f64,
    pub q_bound_ok: bool,
    /// `max |Z_ij|` over `J x J^c`.
    pub dual_offsupport_max: f64,
    /// `max |Z_ij|` over off-diagonal `J^c x J^c`.
    pub dual_complement_max: f64,
    /// Operator norm of `blockdiag(S_JJ - rho Z_JJ - Q Sigma_JJ Q^T, diag(W_{J^c J^c}))`.
    pub noise_opnorm: f64,
    /// `lambda_k - lambda_{k+1}` of `Sigma`.
    pub signal_gap: f64,
    /// `2 noise_opnorm <= signal_gap`.
    pub noise_ok: bool,
    /// `lambda_k - lambda_{k+1}` of `Sigma_tilde = S - rho Z`.
    pub sigma_tilde_gap: f64,
    /// Sign condition on `J x J`.
    pub kkt_sign_mismatch: f64,
    /// `sum top-k eig(Sigma_tilde) - <Sigma_tilde, Htilde>`.
    pub kkt_fantope_gap: f64,
    pub subproblem_iters: usize,
    /// Dual feasibility, sign conditions and optimality of `Htilde` for
    /// `Sigma_tilde`: the pair is then optimal for the full problem.
    pub witness_valid: bool,
    #[serde(skip)]
    pub z: Array2<f64>,
    #[serde(skip)]
    pub q: Array2<f64>,
}

pub fn build_witness(sigma: &SymMat, s: &SymMat, k: usize, j: &SupportSet, rho: f64) -> Result<WitnessReport> {
    build_witness_with(sigma, s, k, j, rho, &SolverConfig::default())
}

/// As [`build_witness`], solving the restricted problem with `config`
/// (its `k`, `rho` and `tau_en` are overridden).
pub fn build_witness_with(
    sigma: &SymMat,
    s: &SymMat,
    k: usize,
    j: &SupportSet,
    rho: f64,
    config: &SolverConfig,
) -> Result<WitnessReport> {
    let policy = config.policy;
    let p = sigma.dim();
    if !(rho > 1e-12 && rho.is_finite()) {
        return Err(FpsError::invalid(format!("witness construction needs rho > 1e-12, got {rho}")));
    }
    if s.dim() != p {
        return Err(FpsError::invalid(format!("dimension mismatch: {} vs {p}", s.dim())));
    }
    check_support_range(j, p)?;
    let idx = j.indices();
    let sdim = idx.len();
    if k == 0 || k > sdim {
        return Err(FpsError::invalid(format!("need 0 < k <= |J| = {sdim}, got {k}")));
    }
    let pop = Population::new(sigma, k, &policy)?;
    let gap = pop.gap;
    let comp = j.complement(p);

    // Restricted problem on S_JJ.
    let s_jj = s.principal(idx);
    let sub_cfg = SolverConfig { k, rho, tau_en: 0.0, ..*config };
    let sub = solver::solve_fps(&s_jj, &sub_cfg)?;
    let z_jj = sub.z.clone();
    let mut htilde = Array2::<f64>::zeros((p, p));
    for (a, &i) in idx.iter().enumerate() {
        for (b, &l) in idx.iter().enumerate() {
            htilde[[i, l]] = sub.h.h[[a, b]];
        }
    }

    // Full-basis rotation: align leading and trailing blocks separately.
    let m_jj = SymMat::from_symmetric(s_jj.as_array() - &(&z_jj * rho));
    let sigma_jj = sigma.principal(idx);
    let hat = eig_sym_with(&m_jj, &policy)?.eigenvectors;
    let pop_vecs = eig_sym_with(&sigma_jj, &policy)?.eigenvectors;
    let mut aligned = Array2::<f64>::zeros((sdim, sdim));
    for (lo, hi) in [(0, k), (k, sdim)] {
        if lo == hi {
            continue;
        }
        let u = pop_vecs.slice(ndarray::s![.., lo..hi]).to_owned();
        let v = hat.slice(ndarray::s![.., lo..hi]).to_owned();
        let align = procrustes_align_with(&u, &v, &policy)?;
        aligned.slice_mut(ndarray::s![.., lo..hi]).assign(&v.dot(&align.rotation));
    }
    let q = aligned.dot(&pop_vecs.t());
    let q_deviation = linalg::frobenius((&q - &Array2::<f64>::eye(sdim)).view());
    let q_bound = 8.0 * rho * sdim as f64 / gap;

    // Dual variable.
    let mut z = Array2::<f64>::zeros((p, p));
    for (a, &i) in idx.iter().enumerate() {
        for (b, &l) in idx.iter().enumerate() {
            z[[i, l]] = z_jj[[a, b]];
        }
    }
    let mut dual_offsupport_max: f64 = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &c in &comp {
            let rotated: f64 = (0..sdim).map(|b| q[[a, b]] * sigma.get(idx[b], c)).sum();
            let v = (s.get(i, c) - rotated) / rho;
            z[[i, c]] = v;
            z[[c, i]] = v;
            dual_offsupport_max = dual_offsupport_max.max(v.abs());
        }
    }
    let mut dual_complement_max: f64 = 0.0;
    for &a in &comp {
        for &c in &comp {
            if a != c {
                let v = (s.get(a, c) - sigma.get(a, c)) / rho;
                z[[a, c]] = v;
                dual_complement_max = dual_complement_max.max(v.abs());
            }
        }
    }

    // Noise part of Sigma_tilde.
    let q_sigma_qt = q.dot(sigma_jj.as_array()).dot(&q.t());
    let noise_jj = m_jj.as_array() - &q_sigma_qt;
    let noise_jj_norm = linalg::sym_opnorm(noise_jj.view(), policy.eig_max_iter)?;
    let w_diag_max = comp.iter().map(|&c| (s.get(c, c) - sigma.get(c, c)).abs()).fold(0.0, f64::max);
    let noise_opnorm = noise_jj_norm.max(w_diag_max);

    // KKT for the assembled pair.
    let mut kkt_sign_mismatch: f64 = 0.0;
    for a in 0..sdim {
        for b in 0..sdim {
            if a != b && sub.h.h[[a, b]].abs() > sub_cfg.support_tol {
                kkt_sign_mismatch = kkt_sign_mismatch.max((z_jj[[a, b]] - sub.h.h[[a, b]].signum()).abs());
            }
        }
    }
    let sigma_tilde = SymMat::from_symmetric(s.as_array() - &(&z * rho));
    let tilde_values = spectral::eigenvalues_with(&sigma_tilde, &policy)?;
    let sigma_tilde_gap = if k < p { tilde_values[k - 1] - tilde_values[k] } else { f64::INFINITY };
    let attained = linalg::inner(sigma_tilde.view(), htilde.view());
    let kkt_fantope_gap = (tilde_values.iter().take(k).sum::<f64>() - attained).max(0.0);

    let dual_ok = dual_offsupport_max <= 1.0 + DUAL_SLACK && dual_complement_max <= 1.0 + DUAL_SLACK;
    let witness_valid = dual_ok
        && kkt_sign_mismatch <= policy.kkt_tol
        && kkt_fantope_gap <= policy.kkt_tol * (1.0 + attained.abs());

    Ok(WitnessReport {
        htilde: FantopePoint::from_parts(htilde, k, sub.h.constraint_residual),
        rho,
        q_deviation,
        q_bound,
        q_bound_ok: q_deviation <= q_bound,
        dual_offsupport_max,
        dual_complement_max,
        noise_opnorm,
        signal_gap: gap,
        noise_ok: 2.0 * noise_opnorm <= gap,
        sigma_tilde_gap,
        kkt_sign_mismatch,
        kkt_fantope_gap,
        subproblem_iters: sub.iters,
        witness_valid,
        z,
        q,
    })
}

/// Population and empirical values of the norm-constrained estimator.
#[derive(Debug, Clone, Serialize)]
pub struct PersistenceReport {
    /// `<Sigma, H_R>` with `H_R` the constrained solution for `Sigma`.
    pub pop_value: f64,
    /// `<Sigma, H_hat_R>` with `H_hat_R` the constrained solution for `S`.
    pub emp_value: f64,
    /// `pop_value - emp_value`.
    pub gap: f64,
    /// `2 R ||S - Sigma||_{inf,inf}`.
    pub bound: f64,
    pub rho_pop: f64,
    pub rho_emp: f64,
    /// KKT report and objective of the population and empirical solves.
    pub solve_kkt: [(solver::KktReport, f64); 2],
    /// `-lower_slack <= gap <= bound + upper_slack`.
    pub ok: bool,
}

/// Slack on the lower side of the persistence sandwich.
pub const PERSISTENCE_LOWER_SLACK: f64 = 1e-6;
/// Slack on the upper side of the persistence sandwich.
pub const PERSISTENCE_UPPER_SLACK: f64 = 1e-4;

pub fn persistence_gap(sigma: &SymMat, s: &SymMat, k: usize, radius: f64, config: &SolverConfig) -> Result<PersistenceReport> {
    if s.dim() != sigma.dim() {
        return Err(FpsError::invalid(format!("dimension mismatch: {} vs {}", s.dim(), sigma.dim())));
    }
    let pop = solver::solve_fps_constrained(sigma, radius, k, config)?;
    let emp = solver::solve_fps_constrained(s, radius, k, config)?;
    let pop_value = linalg::inner(sigma.view(), pop.solution.h.h.view());
    let emp_value = linalg::inner(sigma.view(), emp.solution.h.h.view());
    let gap = pop_value - emp_value;
    let bound = 2.0 * radius * linalg::max_abs((s.as_array() - sigma.as_array()).view());
    Ok(PersistenceReport {
        pop_value,
        emp_value,
        gap,
        bound,
        rho_pop: pop.rho_star,
        rho_emp: emp.rho_star,
        solve_kkt: [
            (pop.solution.kkt, pop.solution.objective),
            (emp.solution.kkt, emp.solution.objective),
        ],
        ok: gap >= -PERSISTENCE_LOWER_SLACK && gap <= bound + PERSISTENCE_UPPER_SLACK,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityReport {
    /// `f(Sigma) = max <Sigma, H>` over the constraint set.
    pub f_base: f64,
    pub f_perturbed: f64,
    pub f_diff: f64,
    /// `2 R ||Delta||_{inf,inf}`.
    pub bound: f64,
    /// KKT report and objective of the base and perturbed solves.
    pub solve_kkt: [(solver::KktReport, f64); 2],
    pub ok: bool,
}

pub fn stability_check(sigma: &SymMat, delta: &SymMat, k: usize, radius: f64, config: &SolverConfig) -> Result<StabilityReport> {
    let perturbed = sigma.add(delta)?;
    let base = solver::solve_fps_constrained(sigma, radius, k, config)?;
    let pert = solver::solve_fps_constrained(&perturbed, radius, k, config)?;
    let f_base = linalg::inner(sigma.view(), base.solution.h.h.view());
    let f_perturbed = linalg::inner(perturbed.view(), pert.solution.h.h.view());
    let f_diff = (f_perturbed - f_base).abs();
    let bound = 2.0 * radius * delta.max_abs();
    Ok(StabilityReport {
        f_base,
        f_perturbed,
        f_diff,
        bound,
        solve_kkt: [
            (base.solution.kkt, base.solution.objective),
            (pert.solution.kkt, pert.solution.objective),
        ],
        ok: f_diff <= bound + PERSISTENCE_UPPER_SLACK,
    })
}
