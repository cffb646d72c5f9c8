//! Synthetic covariance models, Gaussian sampling and sample covariances.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{FpsError, Result};
use crate::linalg;
use crate::rng::{self, FpsRng};
use crate::spectral::{eig_sym, FantopePoint, SymMat};
use crate::support::SupportSet;

/// Population covariance with its principal subspace, support and gap.
#[derive(Debug, Clone, Serialize)]
pub struct ModelInstance {
    #[serde(skip)]
    pub sigma: SymMat,
    /// Projector onto the leading `k` eigenvectors of `sigma`.
    #[serde(skip)]
    pub pi: FantopePoint,
    pub support: SupportSet,
    pub k: usize,
    /// `lambda_k - lambda_{k+1}`; infinite when `k = p`.
    pub gap: f64,
    pub eigenvalues: Vec<f64>,
    pub label: String,
}

impl ModelInstance {
    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub(crate) fn from_sigma(sigma: SymMat, support: SupportSet, k: usize, label: String) -> Result<Self> {
        let spec = eig_sym(&sigma)?;
        let basis = spec.leading(k);
        let pi = FantopePoint::certify(basis.dot(&basis.t()), k)?;
        Ok(ModelInstance {
            gap: spec.gap(k),
            eigenvalues: spec.eigenvalues.to_vec(),
            sigma,
            pi,
            support,
            k,
            label,
        })
    }
}

/// `n` draws stored row-wise.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub n: usize,
    pub data: Array2<f64>,
    pub seed: u64,
}

const MAX_RESAMPLES: usize = 100;
const ROW_ZERO: f64 = 1e-8;

/// `Sigma = U diag(spikes) U^T + noise I` with a Haar-random orthonormal
/// `|J| x k` basis `U` placed on the rows in `J`.
pub fn gen_spiked(p: usize, k: usize, support: &SupportSet, spikes: &[f64], noise: f64, seed: u64) -> Result<ModelInstance> {
    let mut rng = rng::seeded(seed);
    gen_spiked_with(p, k, support, spikes, noise, &mut rng)
}

pub fn gen_spiked_with(
    p: usize,
    k: usize,
    support: &SupportSet,
    spikes: &[f64],
    noise: f64,
    rng: &mut FpsRng,
) -> Result<ModelInstance> {
    let s = support.len();
    if k == 0 || s < k {
        return Err(FpsError::invalid(format!("need 1 <= k <= |J|, got k = {k}, |J| = {s}")));
    }
    if support.indices().iter().any(|&i| i >= p) {
        return Err(FpsError::invalid(format!("support {support} exceeds dimension {p}")));
    }
    if spikes.len() != k {
        return Err(FpsError::invalid(format!("expected {k} spike values, got {}", spikes.len())));
    }
    if spikes.iter().any(|&v| !(v > 0.0 && v.is_finite())) || spikes.windows(2).any(|w| w[0] < w[1]) {
        return Err(FpsError::invalid("spike values must be positive and descending"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(FpsError::invalid(format!("noise must be non-negative, got {noise}")));
    }

    let basis = (0..MAX_RESAMPLES)
        .map(|_| haar_basis(s, k, rng))
        .find(|u| u.axis_iter(Axis(0)).all(|row| row.dot(&row).sqrt() > ROW_ZERO))
        .ok_or_else(|| FpsError::DegenerateModel(format!("no basis with full row support after {MAX_RESAMPLES} draws")))?;

    let idx = support.indices();
    let mut sigma = Array2::<f64>::eye(p) * noise;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            sigma[[i, j]] += (0..k).map(|c| basis[[a, c]] * spikes[c] * basis[[b, c]]).sum::<f64>();
        }
    }
    let label = format!("spiked(p={p},k={k},s={s})");
    ModelInstance::from_sigma(SymMat::new(sigma)?, support.clone(), k, label)
}

/// Orthonormal columns from modified Gram-Schmidt on a Gaussian matrix;
/// normalizing against a positive `R` diagonal makes the law Haar.
fn haar_basis(s: usize, k: usize, rng: &mut FpsRng) -> Array2<f64> {
    loop {
        let mut q = Array2::<f64>::from_shape_simple_fn((s, k), || rng.sample(StandardNormal));
        let mut ok = true;
        for c in 0..k {
            for prev in 0..c {
                let proj = q.column(prev).dot(&q.column(c));
                let prev_col = q.column(prev).to_owned();
                q.column_mut(c).scaled_add(-proj, &prev_col);
            }
            let norm = q.column(c).dot(&q.column(c)).sqrt();
            if norm < 1e-10 {
                ok = false;
                break;
            }
            q.column_mut(c).mapv_inplace(|x| x / norm);
        }
        if ok {
            return q;
        }
    }
}

/// Toy covariance
///
/// ```text
/// [[0.9, 0.8,  t],
///  [0.8, 0.9, -t],
///  [ t,  -t,  1]]
/// ```
///
/// with `k = 1` and `J = {0, 1}`; requires `|t| < 0.35`.
pub fn gen_toy(t: f64) -> Result<ModelInstance> {
    if !(t.abs() < 0.35) {
        return Err(FpsError::invalid(format!("toy parameter must satisfy |t| < 0.35, got {t}")));
    }
    let sigma = SymMat::from_rows(&[vec![0.9, 0.8, t], vec![0.8, 0.9, -t], vec![t, -t, 1.0]])?;
    let model = ModelInstance::from_sigma(sigma, SupportSet::prefix(2), 1, format!("toy(t={t})"))?;
    if model.pi.h[[2, 2]].sqrt() > ROW_ZERO {
        return Err(FpsError::DegenerateModel(format!("leading eigenvector leaks outside J at t = {t}")));
    }
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct PlantedClique {
    /// `A A^T / (p - 1)`.
    pub s: SymMat,
    /// Closed-form expectation of `s`.
    pub sigma: SymMat,
    pub clique: SupportSet,
}

/// Default multiple `c` in the clique penalty `rho = c sqrt(log p / (p - 1))`.
pub const DEFAULT_CLIQUE_MULTIPLE: f64 = 0.9;

/// `c sqrt(log p / (p - 1))`, the scale of `||S - Sigma||_{inf,inf}` for the clique model.
pub fn clique_rho(p: usize, multiple: f64) -> f64 {
    multiple * ((p as f64).ln() / (p as f64 - 1.0)).sqrt()
}

/// Random graph on `p` vertices with a planted clique on `{0, .., s-1}`;
/// other pairs are joined with probability 1/2. `A` is the signed
/// adjacency matrix with unit diagonal.
pub fn gen_planted_clique(p: usize, s: usize, seed: u64) -> Result<PlantedClique> {
    let mut rng = rng::seeded(seed);
    gen_planted_clique_with(p, s, &mut rng)
}

pub fn gen_planted_clique_with(p: usize, s: usize, rng: &mut FpsRng) -> Result<PlantedClique> {
    if !(2 <= s && s <= p) {
        return Err(FpsError::invalid(format!("need 2 <= s <= p, got s = {s}, p = {p}")));
    }
    let mut a = Array2::<f64>::eye(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let edge = (i < s && j < s) || rng.gen::<bool>();
            let v = if edge { 1.0 } else { -1.0 };
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    let denom = (p - 1) as f64;
    let sample = a.dot(&a.t()) / denom;
    let mut sigma = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        sigma[[i, i]] = p as f64 / denom;
        for j in 0..s {
            if i < s && i != j {
                sigma[[i, j]] = s as f64 / denom;
            }
        }
    }
    Ok(PlantedClique {
        s: SymMat::new(sample)?,
        sigma: SymMat::new(sigma)?,
        clique: SupportSet::prefix(s),
    })
}

/// `n` i.i.d. rows from `N(0, Sigma)`.
pub fn sample_gaussian(model: &ModelInstance, n: usize, seed: u64) -> Result<SampleBatch> {
    let mut rng = rng::seeded(seed);
    let data = gaussian_rows(&model.sigma, n, &mut rng)?;
    Ok(SampleBatch { n, data, seed })
}

/// Sampling from an explicit covariance and stream; `seed` is recorded only.
pub fn sample_gaussian_with(sigma: &SymMat, n: usize, seed: u64, rng: &mut FpsRng) -> Result<SampleBatch> {
    let data = gaussian_rows(sigma, n, rng)?;
    Ok(SampleBatch { n, data, seed })
}

fn gaussian_rows(sigma: &SymMat, n: usize, rng: &mut FpsRng) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(FpsError::invalid("sample size must be at least 1"));
    }
    let root = psd_sqrt(sigma)?;
    let p = sigma.dim();
    let z = Array2::<f64>::from_shape_simple_fn((n, p), || rng.sample(StandardNormal));
    Ok(z.dot(&root))
}

fn psd_sqrt(sigma: &SymMat) -> Result<Array2<f64>> {
    let spec = eig_sym(sigma)?;
    let min = spec.eigenvalues[spec.dim() - 1];
    if min < -1e-10 {
        return Err(FpsError::invalid(format!("covariance is indefinite (min eigenvalue {min:e})")));
    }
    let roots: Array1<f64> = spec.eigenvalues.mapv(|v| v.max(0.0).sqrt());
    Ok(spec.reconstruct_with(&roots))
}

/// `(1/n) sum_i (x_i - xbar)(x_i - xbar)^T`.
pub fn sample_covariance(batch: &SampleBatch) -> Result<SymMat> {
    let n = batch.data.nrows();
    if n < 2 {
        return Err(FpsError::invalid(format!("sample covariance needs n >= 2, got {n}")));
    }
    let mean = batch.data.mean_axis(Axis(0)).expect("non-empty batch");
    let centered = &batch.data - &mean.insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / n as f64;
    SymMat::new(cov)
}

/// `||S - Sigma||_{inf,inf}`.
pub fn entrywise_error(s: &SymMat, sigma: &SymMat) -> Result<f64> {
    if s.dim() != sigma.dim() {
        return Err(FpsError::invalid(format!("dimension mismatch: {} vs {}", s.dim(), sigma.dim())));
    }
    Ok(linalg::max_abs((s.as_array() - sigma.as_array()).view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    #[test]
    fn spiked_rank_one_eigenvalues() {
        let m = gen_spiked(10, 1, &SupportSet::prefix(5), &[2.0], 1.0, 3).unwrap();
        assert_abs_diff_eq!(m.eigenvalues[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.eigenvalues[1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.gap, 2.0, epsilon = 1e-10);
        for i in 5..10 {
            assert!(m.pi.h[[i, i]].abs() < 1e-12);
        }
        let pi2 = m.pi.h.dot(&m.pi.h);
        assert_abs_diff_eq!(pi2, m.pi.h, epsilon = 1e-9);
    }

    #[test]
    fn spiked_full_rank_is_identity_projector() {
        let all = SupportSet::prefix(4);
        let m = gen_spiked(4, 4, &all, &[4.0, 3.0, 2.0, 1.0], 0.0, 9).unwrap();
        assert_abs_diff_eq!(m.pi.h, Array2::<f64>::eye(4), epsilon = 1e-10);
        assert!(m.gap.is_infinite());
    }

    #[test]
    fn spiked_rejects_bad_input() {
        let j = SupportSet::prefix(3);
        assert!(gen_spiked(10, 4, &j, &[1.0; 4], 1.0, 0).is_err());
        assert!(gen_spiked(10, 2, &j, &[1.0, 2.0], 1.0, 0).is_err());
        assert!(gen_spiked(10, 1, &j, &[-1.0], 1.0, 0).is_err());
        assert!(gen_spiked(2, 1, &j, &[1.0], 1.0, 0).is_err());
    }

    #[test]
    fn spiked_is_seed_deterministic() {
        let j = SupportSet::prefix(5);
        let a = gen_spiked(20, 2, &j, &[3.0, 2.0], 1.0, 11).unwrap();
        let b = gen_spiked(20, 2, &j, &[3.0, 2.0], 1.0, 11).unwrap();
        assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn toy_matrix() {
        let m = gen_toy(0.0).unwrap();
        assert_eq!(m.sigma.as_array(), &arr2(&[[0.9, 0.8, 0.0], [0.8, 0.9, 0.0], [0.0, 0.0, 1.0]]));
        assert_abs_diff_eq!(m.gap, 0.7, epsilon = 1e-12);
        let m = gen_toy(0.3).unwrap();
        assert_abs_diff_eq!(m.eigenvalues[0], 1.7, epsilon = 1e-12);
        assert!(gen_toy(0.4).is_err());
    }

    #[test]
    fn planted_clique_small_sigma() {
        let c = gen_planted_clique(3, 2, 1).unwrap();
        assert_eq!(c.sigma.as_array(), &arr2(&[[1.5, 1.0, 0.0], [1.0, 1.5, 0.0], [0.0, 0.0, 1.5]]));
        assert!(gen_planted_clique(3, 1, 1).is_err());
    }

    #[test]
    fn planted_clique_leading_eigenvector() {
        let c = gen_planted_clique(200, 40, 5).unwrap();
        let spec = eig_sym(&c.sigma).unwrap();
        let v = spec.eigenvectors.column(0);
        let sign = v[0].signum();
        for i in 0..200 {
            let want = if i < 40 { 1.0 / 40f64.sqrt() } else { 0.0 };
            assert_abs_diff_eq!(sign * v[i], want, epsilon = 1e-10);
        }
    }

    #[test]
    fn covariance_of_two_opposite_points() {
        let x = [1.0, -2.0, 0.5];
        let data = arr2(&[x, [-1.0, 2.0, -0.5]]);
        let s = sample_covariance(&SampleBatch { n: 2, data, seed: 0 }).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(s.get(i, j), x[i] * x[j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn covariance_of_constant_batch_is_zero() {
        let data = Array2::from_elem((5, 3), 2.5);
        let s = sample_covariance(&SampleBatch { n: 5, data, seed: 0 }).unwrap();
        assert!(s.max_abs() < 1e-15);
        let one = SampleBatch { n: 1, data: Array2::zeros((1, 3)), seed: 0 };
        assert!(sample_covariance(&one).is_err());
    }

    #[test]
    fn gaussian_toy_law_of_large_numbers() {
        let m = gen_toy(0.0).unwrap();
        let batch = sample_gaussian(&m, 100_000, 42).unwrap();
        let s = sample_covariance(&batch).unwrap();
        assert!(entrywise_error(&s, &m.sigma).unwrap() < 0.05);
    }

    #[test]
    fn gaussian_diag_and_identity_mean() {
        let sigma = SymMat::diag(&[2.0, 1.0]);
        let mut rng = rng::seeded(8);
        let batch = sample_gaussian_with(&sigma, 10_000, 8, &mut rng).unwrap();
        let s = sample_covariance(&batch).unwrap();
        assert!(entrywise_error(&s, &sigma).unwrap() < 0.1);

        let p = 10;
        let n = 1000;
        let batch = sample_gaussian_with(&SymMat::identity(p), n, 1, &mut rng::seeded(1)).unwrap();
        let mean = batch.data.mean_axis(Axis(0)).unwrap();
        assert!(mean.dot(&mean).sqrt() <= 4.0 * (p as f64 / n as f64).sqrt());
    }

    #[test]
    fn gaussian_rejects_indefinite_and_repeats() {
        let bad = SymMat::diag(&[1.0, -0.5]);
        assert!(matches!(
            sample_gaussian_with(&bad, 10, 0, &mut rng::seeded(0)),
            Err(FpsError::InvalidInput(_))
        ));
        let m = gen_toy(0.1).unwrap();
        assert_eq!(sample_gaussian(&m, 50, 3).unwrap().data, sample_gaussian(&m, 50, 3).unwrap().data);
    }

    #[test]
    fn entrywise_error_examples() {
        let sigma = gen_toy(0.0).unwrap().sigma;
        assert_eq!(entrywise_error(&sigma, &sigma).unwrap(), 0.0);
        let mut bumped = sigma.as_array().clone();
        bumped[[0, 1]] += 0.3;
        bumped[[1, 0]] += 0.3;
        let bumped = SymMat::new(bumped).unwrap();
        assert_abs_diff_eq!(entrywise_error(&bumped, &sigma).unwrap(), 0.3, epsilon = 1e-12);
        assert!(entrywise_error(&SymMat::identity(2), &sigma).is_err());
    }
}
