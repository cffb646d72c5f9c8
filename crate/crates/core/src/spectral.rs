//! Symmetric eigendecomposition, Euclidean projection onto the trace-k
//! Fantope, top-k projectors and orthogonal Procrustes alignment.

use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::error::{FpsError, Result};
use crate::linalg;
use crate::policy::NumericPolicy;

/// Dense symmetric `p x p` matrix.
///
/// Constructors symmetrize their input through `(A + A^T) / 2` and keep the
/// asymmetry that was removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    data: Array2<f64>,
    asymmetry: f64,
}

impl SymMat {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(FpsError::invalid(format!(
                "matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(FpsError::invalid("matrix must have positive dimension"));
        }
        let asymmetry = linalg::asymmetry(a.view());
        let data = if asymmetry == 0.0 {
            a
        } else {
            (&a + &a.t()) * 0.5
        };
        Ok(SymMat { data, asymmetry })
    }

    /// Builds from row-major entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(FpsError::invalid("rows must all have length equal to the row count"));
        }
        let a = Array2::from_shape_fn((p, p), |(i, j)| rows[i][j]);
        SymMat::new(a)
    }

    pub fn zeros(p: usize) -> Self {
        SymMat { data: Array2::zeros((p, p)), asymmetry: 0.0 }
    }

    pub fn identity(p: usize) -> Self {
        SymMat { data: Array2::eye(p), asymmetry: 0.0 }
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMat { data: Array2::from_diag(&Array1::from(values.to_vec())), asymmetry: 0.0 }
    }

    /// Wraps a matrix already known to be symmetric up to rounding.
    pub(crate) fn from_symmetric(a: Array2<f64>) -> Self {
        let asymmetry = linalg::asymmetry(a.view());
        if asymmetry == 0.0 {
            SymMat { data: a, asymmetry }
        } else {
            SymMat { data: (&a + &a.t()) * 0.5, asymmetry }
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Asymmetry removed at construction, `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.data.view())
    }

    pub fn scaled(&self, factor: f64) -> SymMat {
        SymMat { data: &self.data * factor, asymmetry: 0.0 }
    }

    pub fn add(&self, other: &SymMat) -> Result<SymMat> {
        check_same_dim(self, other)?;
        Ok(SymMat { data: &self.data + &other.data, asymmetry: 0.0 })
    }

    pub fn sub(&self, other: &SymMat) -> Result<SymMat> {
        check_same_dim(self, other)?;
        Ok(SymMat { data: &self.data - &other.data, asymmetry: 0.0 })
    }

    /// Principal submatrix on `indices`.
    pub fn principal(&self, indices: &[usize]) -> SymMat {
        SymMat { data: linalg::submatrix(self.data.view(), indices, indices), asymmetry: 0.0 }
    }
}

fn check_same_dim(a: &SymMat, b: &SymMat) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FpsError::invalid(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Full eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Array1<f64>,
    /// Orthonormal columns; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: Array2<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `gamma_k - gamma_{k+1}` with `gamma_{p+1} = -inf`.
    pub fn gap(&self, k: usize) -> f64 {
        if k >= self.dim() {
            f64::INFINITY
        } else {
            self.eigenvalues[k - 1] - self.eigenvalues[k]
        }
    }

    /// Sum of the `k` largest eigenvalues.
    pub fn top_sum(&self, k: usize) -> f64 {
        self.eigenvalues.iter().take(k).sum()
    }

    /// `V diag(w) V^T`, exactly symmetric.
    pub fn reconstruct_with(&self, values: &Array1<f64>) -> Array2<f64> {
        let p = self.eigenvectors.nrows();
        let mut out = vec![0.0; p * p];
        let vecs = self.eigenvectors.t().as_standard_layout().to_owned();
        for (j, &w) in values.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let v = vecs.row(j);
            let v = v.as_slice().expect("standard layout");
            for a in 0..p {
                let va = w * v[a];
                if va == 0.0 {
                    continue;
                }
                let row = &mut out[a * p + a..(a + 1) * p];
                for (o, vb) in row.iter_mut().zip(&v[a..]) {
                    *o += va * vb;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                out[a * p + b] = out[b * p + a];
            }
        }
        Array2::from_shape_vec((p, p), out).expect("square buffer")
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// The first `k` eigenvectors as a `p x k` matrix.
    pub fn leading(&self, k: usize) -> Array2<f64> {
        self.eigenvectors.slice(ndarray::s![.., ..k]).to_owned()
    }
}

pub fn eig_sym(a: &SymMat) -> Result<Spectrum> {
    eig_sym_with(a, &NumericPolicy::default())
}

pub fn eig_sym_with(a: &SymMat, policy: &NumericPolicy) -> Result<Spectrum> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(FpsError::invalid("matrix has non-finite entries"));
    }
    let (eigenvalues, eigenvectors) = linalg::symmetric_eigen(a.view(), policy.eig_max_iter)?;
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// A point of the trace-k Fantope `{H : 0 <= H <= I, trace H = k}` together
/// with its measured constraint residual.
#[derive(Debug, Clone, Serialize)]
pub struct FantopePoint {
    pub k: usize,
    #[serde(skip)]
    pub h: Array2<f64>,
    /// `max(asymmetry, -lambda_min clipped at 0, lambda_max - 1 clipped at 0, |trace - k|)`.
    pub constraint_residual: f64,
}

impl FantopePoint {
    /// Measures the constraint residual of `h` with a fresh eigendecomposition.
    pub fn certify(h: Array2<f64>, k: usize) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(FpsError::invalid("Fantope point must be square"));
        }
        let asym = linalg::asymmetry(h.view());
        let sym = SymMat::from_symmetric(h.clone());
        let spec = eig_sym(&sym)?;
        let residual = fantope_residual(&spec.eigenvalues, k).max(asym);
        Ok(FantopePoint { k, h, constraint_residual: residual })
    }

    pub(crate) fn from_parts(h: Array2<f64>, k: usize, constraint_residual: f64) -> Self {
        FantopePoint { k, h, constraint_residual }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn is_feasible(&self, policy: &NumericPolicy) -> bool {
        self.constraint_residual <= policy.fantope_tol * (self.k as f64).max(1.0)
    }

    pub fn trace(&self) -> f64 {
        self.h.diag().sum()
    }

    pub fn l11(&self) -> f64 {
        linalg::l11(self.h.view())
    }
}

fn fantope_residual(eigenvalues: &Array1<f64>, k: usize) -> f64 {
    let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let trace: f64 = eigenvalues.sum();
    (-min).max(0.0).max((max - 1.0).max(0.0)).max((trace - k as f64).abs())
}

#[derive(Debug, Clone)]
pub struct FantopeProjectionResult {
    pub point: FantopePoint,
    /// Water-filling level.
    pub theta: f64,
    /// `gamma_j^+(theta) = min(max(gamma_j - theta, 0), 1)`, in eigenvalue order.
    pub clipped_eigenvalues: Array1<f64>,
}

/// `sum_j min(max(gamma_j - theta, 0), 1)`.
pub fn waterfill_mass(gammas: &[f64], theta: f64) -> f64 {
    gammas.iter().map(|g| (g - theta).clamp(0.0, 1.0)).sum()
}

/// Solves `sum_j min(max(gamma_j - theta, 0), 1) = k` exactly.
///
/// The left side is piecewise linear and non-increasing with kinks at
/// `gamma_j` and `gamma_j - 1`. The largest kink with mass `>= k` is located
/// by bisection over the sorted kinks, then the level is interpolated on the
/// segment to the next kink. On a flat segment the right endpoint is returned.
pub fn waterfill_level(gammas: &[f64], k: usize) -> f64 {
    let target = k as f64;
    let mut kinks: Vec<f64> = gammas.iter().flat_map(|&g| [g, g - 1.0]).collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    // mass(kinks[0]) = p >= k, mass(kinks[last]) = 0 < k (k >= 1)
    let (mut lo, mut hi) = (0usize, kinks.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if waterfill_mass(gammas, kinks[mid]) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (kinks[lo], kinks[hi]);
    let (fa, fb) = (waterfill_mass(gammas, a), waterfill_mass(gammas, b));
    if fa <= target || fa == fb {
        return a;
    }
    a + (fa - target) / (fa - fb) * (b - a)
}

pub fn fantope_project(a: &SymMat, k: usize) -> Result<FantopeProjectionResult> {
    fantope_project_with(a, k, &NumericPolicy::default())
}

pub fn fantope_project_with(a: &SymMat, k: usize, policy: &NumericPolicy) -> Result<FantopeProjectionResult> {
    let p = a.dim();
    if k == 0 || k > p {
        return Err(FpsError::invalid(format!("k must satisfy 0 < k <= p = {p}, got {k}")));
    }
    let spec = eig_sym_with(a, policy)?;
    Ok(project_spectrum(&spec, k))
}

/// Eigenvalues only, descending.
pub(crate) fn eigenvalues_with(a: &SymMat, policy: &NumericPolicy) -> Result<Array1<f64>> {
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(FpsError::invalid("matrix has non-finite entries"));
    }
    let values = linalg::Tridiagonal::reduce(a.view()).eigenvalues(policy.eig_max_iter)?;
    Ok(Array1::from(values))
}

/// Fantope projection that computes only the eigenvectors with a positive
/// clipped eigenvalue. Falls back to the full decomposition when many are
/// needed or the partial eigenvectors fail their checks.
pub(crate) fn fantope_project_partial(a: &SymMat, k: usize, policy: &NumericPolicy) -> Result<FantopeProjectionResult> {
    let p = a.dim();
    if a.data.iter().any(|x| !x.is_finite()) {
        return Err(FpsError::invalid("matrix has non-finite entries"));
    }
    if p >= 16 {
        let tri = linalg::Tridiagonal::reduce(a.view());
        let values = tri.eigenvalues(policy.eig_max_iter)?;
        let theta = waterfill_level(&values, k);
        let clipped: Array1<f64> = values.iter().map(|g| (g - theta).clamp(0.0, 1.0)).collect();
        let m = clipped.iter().take_while(|&&c| c > 0.0).count();
        if 4 * m <= p {
            if let Some(vectors) = tri.eigenvectors(&values[..m]) {
                let partial = Spectrum {
                    eigenvalues: Array1::from(values[..m].to_vec()),
                    eigenvectors: vectors,
                };
                let h = partial.reconstruct_with(&clipped.slice(ndarray::s![..m]).to_owned());
                let residual = (clipped.sum() - k as f64).abs();
                return Ok(FantopeProjectionResult {
                    point: FantopePoint::from_parts(h, k, residual),
                    theta,
                    clipped_eigenvalues: clipped,
                });
            }
        }
    }
    let spec = eig_sym_with(a, policy)?;
    Ok(project_spectrum(&spec, k))
}

/// Fantope projection given an eigendecomposition of the input.
pub(crate) fn project_spectrum(spec: &Spectrum, k: usize) -> FantopeProjectionResult {
    let gammas = spec.eigenvalues.as_slice().expect("contiguous eigenvalues");
    let theta = waterfill_level(gammas, k);
    let clipped = spec.eigenvalues.mapv(|g| (g - theta).clamp(0.0, 1.0));
    let h = spec.reconstruct_with(&clipped);
    // The clipped values are the spectrum of h (exactly symmetric by
    // construction); only the trace can drift, from interpolation round-off.
    let residual = (clipped.sum() - k as f64).abs();
    FantopeProjectionResult {
        point: FantopePoint::from_parts(h, k, residual),
        theta,
        clipped_eigenvalues: clipped,
    }
}

/// Projector onto the span of the top `k` eigenvectors, with the spectral
/// gap `gamma_k - gamma_{k+1}` and a uniqueness flag.
#[derive(Debug, Clone)]
pub struct TopKProjector {
    pub point: FantopePoint,
    pub gap: f64,
    /// False when the gap is at or below the policy's gap tolerance; the
    /// maximizer of `<A, H>` over the Fantope is then not unique.
    pub unique: bool,
}

pub fn top_k_projector(a: &SymMat, k: usize) -> Result<TopKProjector> {
    top_k_projector_with(a, k, &NumericPolicy::default())
}

pub fn top_k_projector_with(a: &SymMat, k: usize, policy: &NumericPolicy) -> Result<TopKProjector> {
    let p = a.dim();
    if k == 0 || k > p {
        return Err(FpsError::invalid(format!("k must satisfy 0 < k <= p = {p}, got {k}")));
    }
    let spec = eig_sym_with(a, policy)?;
    Ok(projector_from_spectrum(&spec, k, policy))
}

pub(crate) fn projector_from_spectrum(spec: &Spectrum, k: usize, policy: &NumericPolicy) -> TopKProjector {
    let p = spec.dim();
    let weights = Array1::from_shape_fn(p, |j| if j < k { 1.0 } else { 0.0 });
    let h = spec.reconstruct_with(&weights);
    let gap = spec.gap(k);
    TopKProjector {
        point: FantopePoint::from_parts(h, k, 0.0),
        gap,
        unique: gap > policy.gap_tol,
    }
}

#[derive(Debug, Clone)]
pub struct ProcrustesAlignment {
    /// Orthogonal `k x k` matrix minimizing `||U - V O||_F`.
    pub rotation: Array2<f64>,
    /// The minimized value `||U - V O||_F`.
    pub distance: f64,
}

pub fn procrustes_align(u: &Array2<f64>, v: &Array2<f64>) -> Result<ProcrustesAlignment> {
    procrustes_align_with(u, v, &NumericPolicy::default())
}

pub fn procrustes_align_with(u: &Array2<f64>, v: &Array2<f64>, policy: &NumericPolicy) -> Result<ProcrustesAlignment> {
    if u.dim() != v.dim() {
        return Err(FpsError::invalid(format!(
            "Procrustes inputs differ in shape: {:?} vs {:?}",
            u.dim(),
            v.dim()
        )));
    }
    let k = u.ncols();
    if k == 0 || k > u.nrows() {
        return Err(FpsError::invalid("Procrustes inputs need 0 < k <= p columns"));
    }
    for (name, m) in [("U", u), ("V", v)] {
        let gram = m.t().dot(m) - Array2::<f64>::eye(k);
        let err = linalg::max_abs(gram.view());
        if !(err <= policy.orthonormal_tol) {
            return Err(FpsError::invalid(format!("{name} is not orthonormal (deviation {err:.3e})")));
        }
    }
    let cross = v.t().dot(u);
    let (left, _s, right) = linalg::small_svd(&cross);
    let rotation = left.dot(&right.t());
    let distance = linalg::frobenius((u - &v.dot(&rotation)).view());
    Ok(ProcrustesAlignment { rotation, distance })
}
