use crate::error::{Error, Result};
use crate::manifold::Matrix;

/// Denominators below this magnitude keep the previous stepsize.
pub const BB_DENOMINATOR_FLOOR: f64 = 1e-18;

/// Safeguards for Barzilai–Borwein steps.
///
/// The default cap is sized for unit-variance sparse-PCA data, where local
/// curvatures are in the tens; a cap of 1 lets BB1 overshoot along the
/// nearly flat rotation directions and the cubic penalty then diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbBounds {
    /// Step used before any secant pair exists.
    pub initial: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for BbBounds {
    fn default() -> Self {
        Self {
            initial: 1e-3,
            min: 1e-6,
            max: 0.05,
        }
    }
}

impl BbBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0) || !(self.min <= self.max) || !self.max.is_finite() {
            return Err(Error::Config(format!(
                "BB bounds need 0 < min <= max < inf, got [{}, {}]",
                self.min, self.max
            )));
        }
        if !(self.initial > 0.0) || !self.initial.is_finite() {
            return Err(Error::Config(format!(
                "initial BB step must be positive, got {}",
                self.initial
            )));
        }
        Ok(())
    }

    fn clamp(&self, eta: f64) -> f64 {
        eta.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// Per-agent alternating BB1/BB2 steps from local secant pairs.
    Bb(BbBounds),
}

impl StepSize {
    pub fn validate(&self) -> Result<()> {
        match self {
            StepSize::Fixed(eta) if !(*eta > 0.0) || !eta.is_finite() => Err(Error::Config(
                format!("fixed stepsize must be positive and finite, got {eta}"),
            )),
            StepSize::Fixed(_) => Ok(()),
            StepSize::Bb(b) => b.validate(),
        }
    }

    pub fn initial(&self) -> f64 {
        match self {
            StepSize::Fixed(eta) => *eta,
            StepSize::Bb(b) => b.clamp(b.initial),
        }
    }
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Bb(BbBounds::default())
    }
}

/// Barzilai–Borwein step from `S = X_curr − X_prev`, `V = H_curr − H_prev`.
///
/// Odd `k` uses `|⟨S,S⟩/⟨S,V⟩|`, even `k` uses `|⟨S,V⟩/⟨V,V⟩|`. The result is
/// clamped to `[min, max]`; a vanishing denominator returns `prev`.
pub fn bb_stepsize(
    x_prev: &Matrix,
    x_curr: &Matrix,
    h_prev: &Matrix,
    h_curr: &Matrix,
    k: usize,
    prev: f64,
    bounds: &BbBounds,
) -> f64 {
    let s = x_curr - x_prev;
    let v = h_curr - h_prev;
    bb_from_secant(&s, &v, k, prev, bounds)
}

pub(crate) fn bb_from_secant(s: &Matrix, v: &Matrix, k: usize, prev: f64, bounds: &BbBounds) -> f64 {
    let sv = s.dot(v);
    let (num, den) = if k % 2 == 1 {
        (s.norm_squared(), sv)
    } else {
        (sv, v.norm_squared())
    };
    if den.abs() < BB_DENOMINATOR_FLOOR {
        return prev;
    }
    let eta = (num / den).abs();
    if !eta.is_finite() {
        return prev;
    }
    bounds.clamp(eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    fn wide() -> BbBounds {
        BbBounds {
            max: 1.0,
            ..BbBounds::default()
        }
    }

    #[test]
    fn unit_curvature_gives_one() {
        let b = wide();
        let z = col(&[0.0, 0.0]);
        let s = col(&[0.3, -0.2]);
        for k in 1..=2 {
            assert!((bb_stepsize(&z, &s, &z, &s, k, 0.1, &b) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_ratio() {
        let b = wide();
        let z = col(&[0.0, 0.0]);
        let s = col(&[1.0, 2.0]);
        let v = &s * 2.0;
        assert!((bb_stepsize(&z, &s, &z, &v, 1, 0.1, &b) - 0.5).abs() < 1e-15);
        assert!((bb_stepsize(&z, &s, &z, &v, 2, 0.1, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_denominator_keeps_previous() {
        let b = wide();
        let z = col(&[0.0, 0.0]);
        let s = col(&[1.0, 0.0]);
        let v = col(&[0.0, 1.0]);
        assert_eq!(bb_stepsize(&z, &s, &z, &v, 1, 0.037, &b), 0.037);
        assert_eq!(bb_stepsize(&z, &s, &z, &z, 2, 0.037, &b), 0.037);
    }

    #[test]
    fn clamps_to_bounds() {
        let b = BbBounds {
            initial: 0.1,
            min: 0.01,
            max: 0.2,
        };
        let z = col(&[0.0]);
        let s = col(&[1.0]);
        assert_eq!(bb_stepsize(&z, &s, &z, &(&s * 1e-3), 1, 0.1, &b), 0.2);
        assert_eq!(bb_stepsize(&z, &s, &z, &(&s * 1e3), 1, 0.1, &b), 0.01);
    }

    #[test]
    fn validation() {
        assert!(StepSize::Fixed(0.0).validate().is_err());
        assert!(StepSize::Bb(BbBounds {
            initial: 1.0,
            min: 2.0,
            max: 1.0
        })
        .validate()
        .is_err());
        assert!(StepSize::default().validate().is_ok());
    }
}
