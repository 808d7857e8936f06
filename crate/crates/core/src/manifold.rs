//! Stiefel-manifold primitives.
//!
//! The Stiefel manifold `St(n, p)` is the set of `n x p` matrices with
//! orthonormal columns. The decentralized iterates are allowed to leave it,
//! so most functions here accept an arbitrary [`Matrix`]; only the
//! constructors that guarantee orthonormality return a [`StiefelPoint`].

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense real matrix used for every iterate, gradient and tracker.
pub type Matrix = DMatrix<f64>;

/// Default feasibility tolerance for constructed points.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A matrix known to have orthonormal columns up to `feasibility_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    value: Matrix,
    feasibility_tol: f64,
}

impl StiefelPoint {
    /// Wraps `value` after checking `‖XᵀX − I‖_F ≤ tol`.
    pub fn new(value: Matrix, tol: f64) -> Result<Self> {
        if value.ncols() > value.nrows() || value.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "Stiefel point needs n >= p >= 1, got {}x{}",
                value.nrows(),
                value.ncols()
            )));
        }
        let feas = feasibility(&value);
        if !(feas <= tol) {
            return Err(Error::Parameter(format!(
                "matrix is not orthonormal: feasibility {feas:e} exceeds {tol:e}"
            )));
        }
        Ok(Self {
            value,
            feasibility_tol: tol,
        })
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn into_inner(self) -> Matrix {
        self.value
    }

    pub fn feasibility_tol(&self) -> f64 {
        self.feasibility_tol
    }

    pub fn n(&self) -> usize {
        self.value.nrows()
    }

    pub fn p(&self) -> usize {
        self.value.ncols()
    }
}

impl AsRef<Matrix> for StiefelPoint {
    fn as_ref(&self) -> &Matrix {
        &self.value
    }
}

/// Symmetric part `(B + Bᵀ)/2` of a square matrix.
pub fn sym(b: &Matrix) -> Result<Matrix> {
    if !b.is_square() {
        return Err(Error::Dimension(format!(
            "sym needs a square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(sym_unchecked(b))
}

pub(crate) fn sym_unchecked(b: &Matrix) -> Matrix {
    let n = b.nrows();
    Matrix::from_fn(n, n, |i, j| 0.5 * (b[(i, j)] + b[(j, i)]))
}

/// `Y − X sym(XᵀY)`. For `X` on the manifold this is the orthogonal
/// projection of `Y` onto the tangent space at `X`.
pub fn proj_tangent(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_same_shape(x, y, "proj_tangent")?;
    Ok(proj_tangent_unchecked(x, y))
}

pub(crate) fn proj_tangent_unchecked(x: &Matrix, y: &Matrix) -> Matrix {
    let xty = x.tr_mul(y);
    y - x * sym_unchecked(&xty)
}

/// Feasibility violation `‖XᵀX − I_p‖_F`.
pub fn feasibility(x: &Matrix) -> f64 {
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] -= 1.0;
    }
    gram.norm()
}

/// Polar retraction: the orthonormal factor `UVᵀ` of the thin SVD
/// `X = UΣVᵀ`, which is the nearest point of the manifold to `X` in the
/// Frobenius norm.
pub fn retract(x: &Matrix) -> Result<StiefelPoint> {
    let (n, p) = x.shape();
    if p == 0 || p > n {
        return Err(Error::Dimension(format!(
            "retraction needs n >= p >= 1, got {n}x{p}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("cannot retract a non-finite matrix".into()));
    }
    let svd = x.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    if !(smallest > largest * 1e-12 * (n as f64)) || largest == 0.0 {
        return Err(Error::Singular { smallest, largest });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let q = u * v_t;
    let feas = feasibility(&q);
    Ok(StiefelPoint {
        value: q,
        feasibility_tol: FEASIBILITY_TOL.max(feas),
    })
}

/// Standard Gaussian `n x p` matrix drawn from a seeded ChaCha stream.
pub fn gaussian_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Column-major fill so the stream layout matches nalgebra's storage.
    Matrix::from_iterator(n, p, (0..n * p).map(|_| StandardNormal.sample(rng)))
}

/// Orthonormal factor of a seeded Gaussian matrix.
pub fn random_stiefel(n: usize, p: usize, seed: u64) -> Result<StiefelPoint> {
    if p == 0 || p > n {
        return Err(Error::Dimension(format!(
            "random_stiefel needs n >= p >= 1, got n = {n}, p = {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    retract(&gaussian_matrix(n, p, &mut rng))
}

/// The `p` leading left singular vectors of `a`, ordered by decreasing
/// singular value, with each column's largest-magnitude entry made positive.
pub fn leading_left_singular_vectors(a: &Matrix, p: usize) -> Result<StiefelPoint> {
    let n = a.nrows();
    if p == 0 || p > n || p > a.ncols() {
        return Err(Error::Dimension(format!(
            "cannot take {p} singular vectors of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut out = Matrix::zeros(n, p);
    for (c, &src) in order.iter().take(p).enumerate() {
        let col = u.column(src);
        let pivot = col.iamax();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        out.set_column(c, &(col * sign));
    }
    let feas = feasibility(&out);
    Ok(StiefelPoint {
        value: out,
        feasibility_tol: FEASIBILITY_TOL.max(feas),
    })
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
/// Both inputs are orthonormalized first.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_shape(a, b, "max_principal_angle")?;
    let qa = retract(a)?.into_inner();
    let qb = retract(b)?.into_inner();
    // sin of the largest angle is the spectral norm of (I − QaQaᵀ)Qb.
    let residual = &qb - &qa * qa.tr_mul(&qb);
    let sin = residual
        .svd(false, false)
        .singular_values
        .max()
        .clamp(0.0, 1.0);
    Ok(sin.asin())
}

pub(crate) fn check_same_shape(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Frobenius inner product.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}
