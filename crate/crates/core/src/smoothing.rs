//! Moreau envelopes of non-smooth convex regularizers.
//!
//! For a convex, `L`-Lipschitz `g` and `σ > 0` the envelope
//!
//! ```text
//! env(X) = min_Y  g(Y) + ‖Y − X‖²_F / (2σ)
//! ```
//!
//! is continuously differentiable with gradient `(X − prox(X)) / σ`, that
//! gradient is bounded by `L` and `1/σ`-Lipschitz, and
//! `env(X) ≤ g(X) ≤ env(X) + σL²/2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::Matrix;

/// A user-supplied convex term. `prox(t, X)` must return
/// `argmin_Y h(Y) + ‖Y − X‖²/(2t)` for the unweighted function `h`.
pub trait ProxFunction: Send + Sync {
    fn value(&self, x: &Matrix) -> f64;
    fn prox(&self, t: f64, x: &Matrix) -> Matrix;
}

#[derive(Clone)]
pub enum RegularizerKind {
    /// Entrywise `Σ |X(i,j)|`.
    L1,
    /// Row-wise `Σ_i ‖X(i,·)‖₂`.
    L21,
    Custom(Arc<dyn ProxFunction>),
}

impl fmt::Debug for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizerKind::L1 => f.write_str("L1"),
            RegularizerKind::L21 => f.write_str("L21"),
            RegularizerKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// `weight · h(X)` together with its Frobenius-norm Lipschitz constant.
#[derive(Debug, Clone)]
pub struct Regularizer {
    kind: RegularizerKind,
    weight: f64,
    lipschitz: f64,
}

impl Regularizer {
    /// `weight · ‖X‖₁` on `n x p` matrices; Lipschitz constant `weight·√(np)`.
    pub fn l1(weight: f64, n: usize, p: usize) -> Result<Self> {
        check_weight(weight)?;
        Ok(Self {
            kind: RegularizerKind::L1,
            weight,
            lipschitz: weight * ((n * p) as f64).sqrt(),
        })
    }

    /// `weight · ‖X‖₂,₁` on `n x p` matrices; Lipschitz constant `weight·√n`.
    pub fn l21(weight: f64, n: usize) -> Result<Self> {
        check_weight(weight)?;
        Ok(Self {
            kind: RegularizerKind::L21,
            weight,
            lipschitz: weight * (n as f64).sqrt(),
        })
    }

    /// `weight · h(X)` for a user-supplied `h`. `lipschitz` is the constant of
    /// the weighted term.
    pub fn custom(h: Arc<dyn ProxFunction>, weight: f64, lipschitz: f64) -> Result<Self> {
        check_weight(weight)?;
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::Parameter(format!(
                "Lipschitz constant must be finite and nonnegative, got {lipschitz}"
            )));
        }
        Ok(Self {
            kind: RegularizerKind::Custom(h),
            weight,
            lipschitz,
        })
    }

    /// The zero function.
    pub fn zero() -> Self {
        Self {
            kind: RegularizerKind::L1,
            weight: 0.0,
            lipschitz: 0.0,
        }
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Same kind with both weight and Lipschitz constant scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        check_weight(self.weight * factor)?;
        Ok(Self {
            kind: self.kind.clone(),
            weight: self.weight * factor,
            lipschitz: self.lipschitz * factor,
        })
    }

    pub fn value(&self, x: &Matrix) -> f64 {
        if self.weight == 0.0 {
            return 0.0;
        }
        let raw = match &self.kind {
            RegularizerKind::L1 => x.iter().map(|v| v.abs()).sum(),
            RegularizerKind::L21 => l21_norm(x),
            RegularizerKind::Custom(h) => h.value(x),
        };
        self.weight * raw
    }

    /// Proximal point `argmin_Y g(Y) + ‖Y − X‖²/(2σ)`.
    pub fn prox(&self, sigma: f64, x: &Matrix) -> Result<Matrix> {
        check_sigma(sigma)?;
        Ok(self.prox_unchecked(sigma, x))
    }

    pub(crate) fn prox_unchecked(&self, sigma: f64, x: &Matrix) -> Matrix {
        let t = sigma * self.weight;
        if t == 0.0 {
            return x.clone();
        }
        match &self.kind {
            RegularizerKind::L1 => x.map(|v| soft_threshold(v, t)),
            RegularizerKind::L21 => {
                let mut y = x.clone();
                for mut row in y.row_iter_mut() {
                    let norm = row.norm();
                    let shrink = if norm > t { 1.0 - t / norm } else { 0.0 };
                    row *= shrink;
                }
                y
            }
            RegularizerKind::Custom(h) => h.prox(t, x),
        }
    }

    /// Moreau envelope value.
    pub fn env_value(&self, sigma: f64, x: &Matrix) -> Result<f64> {
        check_sigma(sigma)?;
        let y = self.prox_unchecked(sigma, x);
        Ok(self.value(&y) + (&y - x).norm_squared() / (2.0 * sigma))
    }

    /// Envelope gradient `(X − prox(X)) / σ`.
    pub fn env_grad(&self, sigma: f64, x: &Matrix) -> Result<Matrix> {
        check_sigma(sigma)?;
        Ok(self.env_grad_unchecked(sigma, x))
    }

    pub(crate) fn env_grad_unchecked(&self, sigma: f64, x: &Matrix) -> Matrix {
        if self.weight == 0.0 {
            return Matrix::zeros(x.nrows(), x.ncols());
        }
        (x - self.prox_unchecked(sigma, x)) / sigma
    }
}

fn l21_norm(x: &Matrix) -> f64 {
    x.row_iter().map(|r| r.norm()).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_weight(weight: f64) -> Result<()> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::Parameter(format!(
            "regularizer weight must be finite and nonnegative, got {weight}"
        )));
    }
    Ok(())
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "smoothing parameter must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

/// Smoothing parameter as a function of the iteration counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSchedule {
    Fixed { sigma: f64 },
    /// `σ0` at `k = 0`, `k^(-exponent)` afterwards.
    Power { sigma0: f64, exponent: f64 },
}

impl SigmaSchedule {
    pub fn fixed(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(SigmaSchedule::Fixed { sigma })
    }

    pub fn power(sigma0: f64, exponent: f64) -> Result<Self> {
        check_sigma(sigma0)?;
        if !exponent.is_finite() {
            return Err(Error::Parameter(format!("exponent must be finite, got {exponent}")));
        }
        Ok(SigmaSchedule::Power { sigma0, exponent })
    }

    /// The decreasing `k^(-1/3)` schedule with `σ0 = 1`.
    pub fn cube_root() -> Self {
        SigmaSchedule::Power {
            sigma0: 1.0,
            exponent: 1.0 / 3.0,
        }
    }

    pub fn sigma_at(&self, k: usize) -> f64 {
        match *self {
            SigmaSchedule::Fixed { sigma } => sigma,
            SigmaSchedule::Power { sigma0, .. } if k == 0 => sigma0,
            SigmaSchedule::Power { exponent, .. } => (k as f64).powf(-exponent),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, SigmaSchedule::Fixed { .. })
    }
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        SigmaSchedule::Fixed { sigma: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::gaussian_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn reg_value_examples() {
        let l1 = Regularizer::l1(1.0, 2, 2).unwrap();
        assert_eq!(l1.value(&Matrix::identity(2, 2)), 2.0);
        let l21 = Regularizer::l21(1.0, 2).unwrap();
        assert_eq!(l21.value(&m(2, 2, &[3.0, 4.0, 0.0, 0.0])), 5.0);

        let w = 0.1 / 32.0;
        let l1 = Regularizer::l1(w, 10, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian_matrix(10, 3, &mut rng);
        let mut naive = 0.0;
        for i in 0..10 {
            for j in 0..3 {
                naive += x[(i, j)].abs();
            }
        }
        assert!((l1.value(&x) - w * naive).abs() < 1e-15);
    }

    #[test]
    fn prox_examples() {
        let l1 = Regularizer::l1(1.0, 1, 1).unwrap();
        assert_eq!(l1.prox(0.5, &Matrix::zeros(1, 1)).unwrap(), Matrix::zeros(1, 1));
        assert_eq!(l1.prox(0.5, &m(1, 1, &[2.0])).unwrap(), m(1, 1, &[1.5]));
        let l21 = Regularizer::l21(1.0, 1).unwrap();
        let y = l21.prox(1.0, &m(1, 2, &[3.0, 4.0])).unwrap();
        // Shrink factor 1 − 1/5.
        assert!((y[(0, 0)] - 2.4).abs() < 1e-14 && (y[(0, 1)] - 3.2).abs() < 1e-14);
        assert!(matches!(l1.prox(0.0, &Matrix::zeros(1, 1)), Err(Error::Parameter(_))));
        assert!(l21.prox(-1.0, &Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn prox_limit_small_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian_matrix(5, 2, &mut rng);
        for g in [Regularizer::l1(0.7, 5, 2).unwrap(), Regularizer::l21(0.7, 5).unwrap()] {
            let sigma = 1e-8;
            let y = g.prox(sigma, &x).unwrap();
            assert!((y - &x).norm() <= sigma * g.lipschitz() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn l21_zero_row_maps_to_zero() {
        let l21 = Regularizer::l21(1.0, 2).unwrap();
        let y = l21.prox(1.0, &m(2, 2, &[0.0, 0.0, 0.3, 0.4])).unwrap();
        assert_eq!(y, Matrix::zeros(2, 2));
    }

    #[test]
    fn envelope_examples() {
        let l1 = Regularizer::l1(1.0, 1, 1).unwrap();
        assert_eq!(l1.env_value(0.3, &Matrix::zeros(1, 1)).unwrap(), 0.0);
        assert!((l1.env_value(0.5, &m(1, 1, &[2.0])).unwrap() - 1.75).abs() < 1e-15);
        assert!((l1.env_grad(0.5, &m(1, 1, &[2.0])).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let l21 = Regularizer::l21(2.0, 3).unwrap();
        assert_eq!(l21.env_grad(0.1, &Matrix::zeros(3, 2)).unwrap(), Matrix::zeros(3, 2));
        assert!(l1.env_value(0.0, &Matrix::zeros(1, 1)).is_err());
        assert!(l1.env_grad(f64::NAN, &Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn env_grad_bounded_by_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [Regularizer::l1(0.4, 6, 3).unwrap(), Regularizer::l21(0.4, 6).unwrap()] {
            for _ in 0..100 {
                let x = gaussian_matrix(6, 3, &mut rng) * rng.random_range(0.01..10.0);
                let sigma = rng.random_range(1e-3..10.0);
                let grad = g.env_grad(sigma, &x).unwrap();
                assert!(grad.norm() <= g.lipschitz() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn zero_regularizer_is_identity_prox() {
        let g = Regularizer::zero();
        let x = m(1, 2, &[1.0, -2.0]);
        assert_eq!(g.prox(0.3, &x).unwrap(), x);
        assert_eq!(g.env_grad(0.3, &x).unwrap(), Matrix::zeros(1, 2));
        assert_eq!(g.value(&x), 0.0);
    }

    // h(X) = ‖X‖²/2, prox = X/(1+t).
    struct HalfSquaredNorm;
    impl ProxFunction for HalfSquaredNorm {
        fn value(&self, x: &Matrix) -> f64 {
            0.5 * x.norm_squared()
        }
        fn prox(&self, t: f64, x: &Matrix) -> Matrix {
            x / (1.0 + t)
        }
    }

    #[test]
    fn custom_regularizer_uses_weighted_prox() {
        let g = Regularizer::custom(Arc::new(HalfSquaredNorm), 2.0, 10.0).unwrap();
        let x = m(1, 1, &[3.0]);
        // argmin 2·y²/2 + (y−3)²/(2·0.5) -> y = 3/(1+1) = 1.5
        assert!((g.prox(0.5, &x).unwrap()[(0, 0)] - 1.5).abs() < 1e-15);
        assert!(Regularizer::custom(Arc::new(HalfSquaredNorm), 1.0, -1.0).is_err());
    }

    #[test]
    fn sigma_schedule_examples() {
        let s = SigmaSchedule::power(1.0, 1.0 / 3.0).unwrap();
        assert!((s.sigma_at(8) - 0.5).abs() < 1e-15);
        assert_eq!(s.sigma_at(1), 1.0);
        assert_eq!(s.sigma_at(0), 1.0);
        let f = SigmaSchedule::fixed(0.1).unwrap();
        assert_eq!(f.sigma_at(999), 0.1);
        let p = SigmaSchedule::power(3.0, 0.5).unwrap();
        assert_eq!(p.sigma_at(0), 3.0);
        let mut prev = f64::INFINITY;
        for k in 1..1000 {
            let v = s.sigma_at(k);
            assert!(v > 0.0 && v <= prev);
            prev = v;
        }
        assert!(SigmaSchedule::fixed(0.0).is_err());
    }
}
