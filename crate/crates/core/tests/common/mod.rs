//! Oracles shared by the integration targets. Nothing here calls into the
//! library's own versions of these computations.

#![allow(dead_code)]

use thanos_core::Matrix;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Matrix) -> Vec<f64> {
    let n = a.nrows();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

/// `max |eig(W − 11ᵀ/d)|`.
pub fn oracle_lambda(w: &Matrix) -> f64 {
    let d = w.nrows();
    let centered = w - Matrix::from_element(d, d, 1.0 / d as f64);
    jacobi_eigenvalues(centered)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

/// Entrywise soft threshold.
pub fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Sparse-PCA direction `β X(XᵀX − I) + ½G(3I − XᵀX) − X sym(XᵀG)` for
/// `G = −A Aᵀ X + ∇env_{σ, w‖·‖₁}(X)`, written entry by entry.
pub fn sparse_pca_l1_direction(a: &Matrix, w: f64, sigma: f64, beta: f64, x: &Matrix) -> Matrix {
    let (n, p) = x.shape();
    let m = a.ncols();
    let mut g = Matrix::zeros(n, p);
    for c in 0..p {
        for s in 0..m {
            let mut proj = 0.0;
            for r in 0..n {
                proj += a[(r, s)] * x[(r, c)];
            }
            for r in 0..n {
                g[(r, c)] -= a[(r, s)] * proj;
            }
        }
        for r in 0..n {
            let v = x[(r, c)];
            g[(r, c)] += (v - soft(v, sigma * w)) / sigma;
        }
    }
    let mut gram = Matrix::zeros(p, p);
    let mut xtg = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            for r in 0..n {
                gram[(i, j)] += x[(r, i)] * x[(r, j)];
                xtg[(i, j)] += x[(r, i)] * g[(r, j)];
            }
        }
    }
    let mut out = Matrix::zeros(n, p);
    for r in 0..n {
        for j in 0..p {
            let mut v = 0.0;
            for i in 0..p {
                let delta = if i == j { 1.0 } else { 0.0 };
                v += beta * x[(r, i)] * (gram[(i, j)] - delta);
                v += 0.5 * g[(r, i)] * (3.0 * delta - gram[(i, j)]);
                v -= x[(r, i)] * 0.5 * (xtg[(i, j)] + xtg[(j, i)]);
            }
            out[(r, j)] = v;
        }
    }
    out
}
