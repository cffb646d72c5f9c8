//! Dense kernels: symmetric eigensolver, small SVD and the matrix norms used
//! throughout the estimator and its diagnostics.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{FpsError, Result};

/// Eigendecomposition of a dense symmetric matrix by Householder
/// tridiagonalization followed by the implicit QL iteration.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the columns of the second array. Only the lower triangle is read.
pub(crate) fn symmetric_eigen(a: ArrayView2<f64>, max_iter: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut v: Vec<f64> = a.iter().copied().collect();
    if !a.is_standard_layout() {
        v = a.to_owned().as_standard_layout().iter().copied().collect();
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);

    // QL rotates pairs of columns; work on the transpose so each rotation
    // touches two contiguous rows.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vt[j * n + i] = v[i * n + j];
        }
    }
    tridiagonal_ql(n, Some(&mut vt), &mut d, &mut e, max_iter)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]));
    let values = Array1::from_iter(order.iter().map(|&j| d[j]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &j) in order.iter().enumerate() {
        let row = &vt[j * n..(j + 1) * n];
        for i in 0..n {
            vectors[[i, col]] = row[i];
        }
    }
    Ok((values, vectors))
}

/// Householder reduction to tridiagonal form (EISPACK `tred2`), accumulating
/// the orthogonal transform in `v` (row-major, `n x n`).
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    let vkj = v[idx(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)` (EISPACK `tql2`). `vt` holds the
/// transposed accumulated transform: row `j` is eigenvector `j` on exit.
fn tridiagonal_ql(n: usize, mut vt: Option<&mut [f64]>, d: &mut [f64], e: &mut [f64], max_iter: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let mut total_iter = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                total_iter += 1;
                if iter > max_iter {
                    return Err(FpsError::NumericalFailure { iterations: total_iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = pythag(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = pythag(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(vt) = vt.as_deref_mut() {
                        let (lo, hi) = vt.split_at_mut((i + 1) * n);
                        let row_i = &mut lo[i * n..];
                        let row_i1 = &mut hi[..n];
                        for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Householder reduction `A = Q T Q^T` that keeps the reflectors instead of
/// forming `Q`, for callers that need all eigenvalues but few eigenvectors.
pub(crate) struct Tridiagonal {
    d: Vec<f64>,
    /// `e[j] = T[j + 1, j]`.
    e: Vec<f64>,
    /// `(tau, v)` with `v[0] = 1`, acting on coordinates `j + 1..n` for reflector `j`.
    reflectors: Vec<(f64, Vec<f64>)>,
}

impl Tridiagonal {
    pub(crate) fn reduce(a: ArrayView2<f64>) -> Self {
        let n = a.nrows();
        let mut w: Vec<f64> = a.as_standard_layout().iter().copied().collect();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![0.0; n];
        for j in 0..n.saturating_sub(2) {
            d[j] = w[j * n + j];
            let m = n - j - 1;
            let off = j + 1;
            let x = &w[j * n + off..(j + 1) * n];
            let alpha = x[0];
            let xnorm = x[1..].iter().map(|t| t * t).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                e[j] = alpha;
                reflectors.push((0.0, Vec::new()));
                continue;
            }
            let beta = -alpha.signum() * alpha.hypot(xnorm);
            let tau = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            let mut v = Vec::with_capacity(m);
            v.push(1.0);
            v.extend(x[1..].iter().map(|t| t * scale));
            e[j] = beta;

            // B <- H B H on the trailing block, with p = tau B v and
            // w = p - (tau / 2)(p^T v) v, B <- B - v w^T - w v^T.
            let p = &mut p[..m];
            for r in 0..m {
                let row = &w[(off + r) * n + off..(off + r + 1) * n];
                p[r] = tau * dot(row, &v);
            }
            let pv = dot(p, &v);
            let half = 0.5 * tau * pv;
            for (pr, vr) in p.iter_mut().zip(&v) {
                *pr -= half * vr;
            }
            let (vs, ps) = (&v[..m], &p[..m]);
            for r in 0..m {
                let (vr, wr) = (vs[r], ps[r]);
                let row = &mut w[(off + r) * n + off..(off + r + 1) * n][..m];
                for c in 0..m {
                    row[c] -= vr * ps[c] + wr * vs[c];
                }
            }
            reflectors.push((tau, v));
        }
        if n >= 2 {
            d[n - 2] = w[(n - 2) * n + n - 2];
            e[n - 2] = w[(n - 1) * n + n - 2];
        }
        if n >= 1 {
            d[n - 1] = w[n * n - 1];
        }
        Tridiagonal { d, e, reflectors }
    }

    fn dim(&self) -> usize {
        self.d.len()
    }

    /// All eigenvalues, descending.
    pub(crate) fn eigenvalues(&self, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut d = self.d.clone();
        // QL expects the subdiagonal in e[1..n].
        let mut e = vec![0.0; n];
        e[1..].copy_from_slice(&self.e);
        tridiagonal_ql(n, None, &mut d, &mut e, max_iter)?;
        d.sort_by(|x, y| y.total_cmp(x));
        Ok(d)
    }

    fn norm(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.e[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.e[i].abs() } else { 0.0 };
                self.d[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Eigenvectors of `A` for the given eigenvalues (descending, as returned by
    /// [`Tridiagonal::eigenvalues`]) by inverse iteration on `T`, with
    /// reorthogonalization inside clusters. Returns `None` when a residual or
    /// orthogonality check fails; callers then fall back to a full solve.
    pub(crate) fn eigenvectors(&self, values: &[f64]) -> Option<Array2<f64>> {
        let n = self.dim();
        let m = values.len();
        let tnorm = self.norm().max(f64::MIN_POSITIVE);
        let cluster_tol = 1e-3 * tnorm;
        let tiny = f64::EPSILON * tnorm;
        let mut ys: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cluster_start = 0;
        for (idx, &lambda) in values.iter().enumerate() {
            if idx > 0 && values[idx - 1] - lambda > cluster_tol {
                cluster_start = idx;
            }
            let lu = TridiagonalLu::factor(&self.d, &self.e, lambda, tiny);
            let mut x: Vec<f64> = (0..n).map(|i| start_entry(i, idx)).collect();
            for _ in 0..4 {
                lu.solve(&mut x);
                for _ in 0..2 {
                    for y in &ys[cluster_start..idx] {
                        let proj: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
                        for (xi, yi) in x.iter_mut().zip(y) {
                            *xi -= proj * yi;
                        }
                    }
                }
                let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return None;
                }
                x.iter_mut().for_each(|t| *t /= norm);
            }
            ys.push(x);
        }

        let tol = 1e-10 * tnorm.max(1.0);
        for (y, &lambda) in ys.iter().zip(values) {
            let mut r2 = 0.0;
            for i in 0..n {
                let mut ty = (self.d[i] - lambda) * y[i];
                if i > 0 {
                    ty += self.e[i - 1] * y[i - 1];
                }
                if i + 1 < n {
                    ty += self.e[i] * y[i + 1];
                }
                r2 += ty * ty;
            }
            if r2.sqrt() > tol {
                return None;
            }
        }
        for a in 0..m {
            for b in 0..a {
                let dot: f64 = ys[a].iter().zip(&ys[b]).map(|(x, y)| x * y).sum();
                if dot.abs() > 1e-10 {
                    return None;
                }
            }
        }

        let mut out = Array2::<f64>::zeros((n, m));
        for (col, mut y) in ys.into_iter().enumerate() {
            for (j, (tau, v)) in self.reflectors.iter().enumerate().rev() {
                if *tau == 0.0 {
                    continue;
                }
                let seg = &mut y[j + 1..];
                let dot: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
                let f = tau * dot;
                for (s, vi) in seg.iter_mut().zip(v) {
                    *s -= f * vi;
                }
            }
            for (i, yi) in y.into_iter().enumerate() {
                out[[i, col]] = yi;
            }
        }
        Some(out)
    }
}

/// Deterministic, well-spread starting vector for inverse iteration.
fn start_entry(i: usize, idx: usize) -> f64 {
    let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (idx as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    0.5 + (h >> 11) as f64 / (1u64 << 53) as f64
}

/// LU factorization of `T - lambda I` with partial pivoting.
struct TridiagonalLu {
    diag: Vec<f64>,
    sup: Vec<f64>,
    sup2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(d: &[f64], e: &[f64], lambda: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut diag: Vec<f64> = d.iter().map(|x| x - lambda).collect();
        let mut sup = e.to_vec();
        let mut sup2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            let sub = e[i];
            if diag[i].abs() >= sub.abs() {
                if diag[i] == 0.0 {
                    diag[i] = tiny;
                }
                let l = sub / diag[i];
                mult[i] = l;
                diag[i + 1] -= l * sup[i];
            } else {
                let l = diag[i] / sub;
                let next = diag[i + 1];
                diag[i] = sub;
                diag[i + 1] = sup[i] - l * next;
                if i + 2 < n {
                    sup2[i] = sup[i + 1];
                    sup[i + 1] = -l * sup2[i];
                }
                sup[i] = next;
                mult[i] = l;
                swapped[i] = true;
            }
        }
        if n > 0 && diag[n - 1] == 0.0 {
            diag[n - 1] = tiny;
        }
        TridiagonalLu { diag, sup, sup2, mult, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.mult[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.sup[i] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.sup2[i] * b[i + 2];
            }
            b[i] = v / self.diag[i];
        }
    }
}

/// Singular value decomposition `M = U diag(s) V^T` of a small square matrix
/// by one-sided Jacobi rotations. Singular values are returned descending.
pub(crate) fn small_svd(m: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "small_svd expects a square matrix");
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    alpha += a[[i, p]] * a[[i, p]];
                    beta += a[[i, q]] * a[[i, q]];
                    gamma += a[[i, p]] * a[[i, q]];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..n {
                        let x = mat[[i, p]];
                        let y = mat[[i, q]];
                        mat[[i, p]] = c * x - s * y;
                        mat[[i, q]] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| a.column(j).dot(&a.column(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms.iter().cloned().fold(0.0, f64::max);

    let mut u = Array2::<f64>::zeros((n, n));
    let mut vs = Array2::<f64>::zeros((n, n));
    let mut s = Array1::<f64>::zeros(n);
    let mut filled = vec![false; n];
    for (col, &j) in order.iter().enumerate() {
        s[col] = norms[j];
        vs.column_mut(col).assign(&v.column(j));
        if norms[j] > 1e-13 * smax.max(f64::MIN_POSITIVE) {
            u.column_mut(col).assign(&(&a.column(j) / norms[j]));
            filled[col] = true;
        }
    }
    complete_orthonormal(&mut u, &filled);
    (u, s, vs)
}

/// Fills the columns of `u` not marked in `filled` with an orthonormal
/// completion of the marked ones (Gram-Schmidt against the standard basis).
fn complete_orthonormal(u: &mut Array2<f64>, filled: &[bool]) {
    let n = u.nrows();
    let mut done = filled.to_vec();
    let mut candidate = 0;
    for col in 0..u.ncols() {
        if done[col] {
            continue;
        }
        while candidate < n {
            let mut x = Array1::<f64>::zeros(n);
            x[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for other in 0..u.ncols() {
                    if done[other] {
                        let proj = u.column(other).dot(&x);
                        x.scaled_add(-proj, &u.column(other));
                    }
                }
            }
            let norm = x.dot(&x).sqrt();
            if norm > 1e-8 {
                u.column_mut(col).assign(&(x / norm));
                done[col] = true;
                break;
            }
        }
    }
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||A||_{inf,inf}`: largest absolute entry.
pub(crate) fn max_abs(a: ArrayView2<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||A||_{1,1}`: sum of absolute entries.
pub(crate) fn l11(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// `||A||_{2,inf}`: largest row Euclidean norm.
pub(crate) fn max_row_norm(a: ArrayView2<f64>) -> f64 {
    a.axis_iter(Axis(0))
        .map(|row| row.dot(&row).sqrt())
        .fold(0.0, f64::max)
}

pub(crate) fn inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(x), Some(y)) if a.shape() == b.shape() => dot(x, y),
        _ => a.iter().zip(b.iter()).map(|(x, y)| x * y).sum(),
    }
}

/// Dot product with four running sums, so the loop vectorizes.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `sqrt(a^2 + b^2)`; falls back to `hypot` only where squaring could
/// overflow or underflow.
#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m > 1e-150 && m < 1e150 {
        (a * a + b * b).sqrt()
    } else {
        a.hypot(b)
    }
}

pub(crate) fn submatrix(a: ArrayView2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| a[[rows[i], cols[j]]])
}

/// Maximum absolute asymmetry `max |A_ij - A_ji|`.
pub(crate) fn asymmetry(a: ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            r = r.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    r
}

/// Spectral norm of a symmetric matrix.
pub(crate) fn sym_opnorm(a: ArrayView2<f64>, max_iter: usize) -> Result<f64> {
    let vals = Tridiagonal::reduce(a).eigenvalues(max_iter)?;
    Ok(vals.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
}
