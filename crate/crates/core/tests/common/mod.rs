#![allow(dead_code)]

use fps_core::SymMat;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with standard normal entries.
pub fn random_sym(p: usize, rng: &mut impl Rng) -> SymMat {
    let a = Array2::<f64>::from_shape_simple_fn((p, p), || rng.sample(StandardNormal));
    SymMat::new(&a + &a.t()).unwrap()
}

/// Cyclic Jacobi eigenvalue oracle: eigenvalues descending and eigenvectors
/// as columns. Slow but independent of the library's tridiagonal routine.
pub fn jacobi_eigen(a: &SymMat) -> (Vec<f64>, Array2<f64>) {
    let n = a.dim();
    let mut m = a.as_array().clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[[y, y]].total_cmp(&m[[x, x]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (values, vectors)
}

/// Haar orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(p: usize, rng: &mut impl Rng) -> Array2<f64> {
    // Gram-Schmidt on rows (contiguous); orthonormal rows make the square
    // matrix orthogonal.
    let mut q = Array2::<f64>::from_shape_simple_fn((p, p), || rng.sample(StandardNormal));
    for j in 0..p {
        let (head, mut tail) = q.view_mut().split_at(Axis(0), j);
        let mut qj = tail.row_mut(0);
        for _ in 0..2 {
            for qi in head.rows() {
                let d = qi.dot(&qj);
                qj.scaled_add(-d, &qi);
            }
        }
        let n = qj.dot(&qj).sqrt();
        qj.mapv_inplace(|x| x / n);
    }
    q
}

/// Random point of the trace-k Fantope: `V diag(w) V^T` with Haar `V` and
/// weights in `[0, 1]` summing to `k`.
pub fn random_fantope_point(p: usize, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut w: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
    // Rescale toward total k while staying inside [0, 1].
    for _ in 0..200 {
        let total: f64 = w.iter().sum();
        let diff = k as f64 - total;
        if diff.abs() < 1e-14 {
            break;
        }
        let free: Vec<usize> = (0..p)
            .filter(|&i| if diff > 0.0 { w[i] < 1.0 } else { w[i] > 0.0 })
            .collect();
        let step = diff / free.len() as f64;
        for i in free {
            w[i] = (w[i] + step).clamp(0.0, 1.0);
        }
    }
    let mut b = random_orthogonal(p, rng);
    for (mut col, wi) in b.columns_mut().into_iter().zip(&w) {
        col *= wi.sqrt();
    }
    b.dot(&b.t())
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn objective(s: &SymMat, h: &Array2<f64>, rho: f64) -> f64 {
    let inner: f64 = s.as_array().iter().zip(h.iter()).map(|(a, b)| a * b).sum();
    inner - rho * h.iter().map(|x| x.abs()).sum::<f64>()
}

/// Maximum of the penalized objective over the 2 x 2 trace-one Fantope by
/// exhaustive grid search. Points are `[[a, c], [c, 1 - a]]` with
/// `c^2 <= a (1 - a)`.
pub fn grid_max(s: &SymMat, rho: f64, n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for ia in 0..=n {
        let a = ia as f64 / n as f64;
        let r = (a * (1.0 - a)).max(0.0).sqrt();
        for ic in 0..=n {
            let c = -r + 2.0 * r * ic as f64 / n as f64;
            let val = s.get(0, 0) * a + s.get(1, 1) * (1.0 - a) + 2.0 * s.get(0, 1) * c
                - rho * (a.abs() + (1.0 - a).abs() + 2.0 * c.abs());
            best = best.max(val);
        }
    }
    best
}

/// Whether `sign(M_JJ) = b b^T` for some of the `2^s` sign vectors `b`.
pub fn enumerate_sign_rank_one(m: &SymMat, idx: &[usize]) -> bool {
    let s = idx.len();
    let sign = |a: usize, b: usize| {
        let v = m.get(a, b);
        if v.abs() <= 1e-12 {
            0.0
        } else {
            v.signum()
        }
    };
    (0u32..(1 << s)).any(|mask| {
        let b: Vec<f64> = (0..s).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        (0..s).all(|x| (0..s).all(|y| sign(idx[x], idx[y]) == b[x] * b[y]))
    })
}

/// Random symmetric matrix on `s + 2` indices and a random `s`-subset.
/// Even trials carry a rank-one sign pattern, some with a few flipped or
/// zeroed entries; odd trials have independent signs.
pub fn random_sign_instance(s: usize, trial: usize, r: &mut impl Rng) -> (SymMat, Vec<usize>) {
    let p = s + 2;
    let mut m = Array2::<f64>::zeros((p, p));
    let b: Vec<f64> = (0..p).map(|_| if r.gen() { 1.0 } else { -1.0 }).collect();
    for i in 0..p {
        for j in i..p {
            let mag = r.gen_range(0.1..2.0);
            let mut v = if trial % 2 == 0 { b[i] * b[j] * mag } else { mag * if r.gen() { 1.0 } else { -1.0 } };
            if trial % 4 == 0 && r.gen_bool(0.05) {
                v = -v;
            }
            if trial % 8 == 2 && r.gen_bool(0.05) {
                v = 0.0;
            }
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    let mut all: Vec<usize> = (0..p).collect();
    for i in 0..2 {
        let pick = r.gen_range(i..all.len());
        all.swap(i, pick);
    }
    let mut chosen = all[2..].to_vec();
    chosen.sort_unstable();
    (SymMat::new(m).unwrap(), chosen)
}
