//! Sufficient conditions on the penalty `β` and stepsize `η` for the
//! convergence guarantee. They are very conservative; the practical defaults
//! violate them by orders of magnitude.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::manifold::gaussian_matrix;
use crate::network::MixingMatrix;
use crate::problem::DecentralizedProblem;
use crate::smoothing::check_sigma;

/// Number of random points used when `sup ‖∇f_i‖` has no closed form.
pub const GRAD_SUP_SAMPLES: usize = 1000;
const GRAD_SUP_SEED: u64 = 0x5eed_f00d;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBounds {
    pub m_f: f64,
    pub m_g: f64,
    pub l_r: f64,
    pub beta_lower: f64,
    /// `η` bound evaluated at `β = beta_lower`.
    pub eta_upper: f64,
    pub lambda: f64,
    pub d: usize,
    pub p: usize,
    /// Whether `m_f` came from closed-form suprema for every agent.
    pub m_f_exact: bool,
}

impl ParameterBounds {
    /// `d(1 − λ²) / (48 (L_r + (7dp + 6d) β)²)`.
    pub fn eta_upper_at(&self, beta: f64) -> f64 {
        eta_upper(self.d, self.p, self.lambda, self.l_r, beta)
    }

    pub fn beta_ok(&self, beta: f64) -> bool {
        beta > self.beta_lower
    }

    pub fn eta_ok(&self, beta: f64, eta: f64) -> bool {
        eta > 0.0 && eta < self.eta_upper_at(beta)
    }
}

/// Radius of the ball over which `M_f` takes its supremum.
pub fn grad_sup_radius(d: usize, p: usize) -> f64 {
    (7.0 * (d * p) as f64 / 6.0).sqrt() + (d as f64).sqrt()
}

/// `M_g = 3 (M_f + L_g)(7dp + 6d + 3) / 6`.
pub fn m_g(m_f: f64, lg: f64, d: usize, p: usize) -> f64 {
    let (d, p) = (d as f64, p as f64);
    3.0 * (m_f + lg) * (7.0 * d * p + 6.0 * d + 3.0) / 6.0
}

/// `L_r = 7dp (L_f + 1/σ) + 6d + 3`.
pub fn l_r(lf: f64, sigma: f64, d: usize, p: usize) -> f64 {
    let (d, p) = (d as f64, p as f64);
    7.0 * d * p * (lf + 1.0 / sigma) + 6.0 * d + 3.0
}

/// Largest of the four lower bounds on `β`.
pub fn beta_lower(m_f: f64, m_g: f64, lg: f64, lf: f64, sigma: f64, d: usize, p: usize) -> f64 {
    let (df, pf) = (d as f64, p as f64);
    let terms = [
        (6.0 + 21.0 * (m_f + lg)) / 5.0,
        72.0 * (4.0 + 3.0 * m_g) / 5.0,
        1.0 / (7.0 * df * pf + 6.0 * df),
        22.0 * (lf + 1.0 / sigma).powi(2),
    ];
    terms.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn eta_upper(d: usize, p: usize, lambda: f64, l_r: f64, beta: f64) -> f64 {
    let (df, pf) = (d as f64, p as f64);
    let denom = l_r + (7.0 * df * pf + 6.0 * df) * beta;
    df * (1.0 - lambda * lambda) / (48.0 * denom * denom)
}

/// Estimates `M_f = max_i sup {‖∇f_i(X)‖_F : ‖X‖_F ≤ ρ}`, using closed forms
/// where a loss provides one and uniform sampling in the ball otherwise.
pub fn estimate_m_f(problem: &DecentralizedProblem) -> (f64, bool) {
    let (d, n, p) = (problem.d(), problem.n(), problem.p());
    let radius = grad_sup_radius(d, p);
    let mut exact = true;
    let mut best: f64 = 0.0;
    for agent in problem.agents() {
        match agent.loss.grad_norm_sup(radius) {
            Some(v) => best = best.max(v),
            None => {
                exact = false;
                let mut rng = ChaCha8Rng::seed_from_u64(GRAD_SUP_SEED);
                for _ in 0..GRAD_SUP_SAMPLES {
                    let mut x = gaussian_matrix(n, p, &mut rng);
                    let norm = x.norm();
                    if norm == 0.0 {
                        continue;
                    }
                    let u: f64 = rng.random();
                    x *= radius * u.powf(1.0 / (n * p) as f64) / norm;
                    best = best.max(agent.loss.grad(&x).norm());
                }
            }
        }
    }
    (best, exact)
}

/// Evaluates all constants of the sufficient parameter conditions.
pub fn condition1_bounds(
    problem: &DecentralizedProblem,
    sigma: f64,
    mixing: &MixingMatrix,
) -> Result<ParameterBounds> {
    check_sigma(sigma)?;
    let (d, p) = (problem.d(), problem.p());
    let (m_f, m_f_exact) = estimate_m_f(problem);
    let lg = problem.lg();
    let lf = problem.lf();
    let m_g = m_g(m_f, lg, d, p);
    let l_r = l_r(lf, sigma, d, p);
    let beta_lower = beta_lower(m_f, m_g, lg, lf, sigma, d, p);
    let lambda = mixing.lambda();
    Ok(ParameterBounds {
        m_f,
        m_g,
        l_r,
        beta_lower,
        eta_upper: eta_upper(d, p, lambda, l_r, beta_lower),
        lambda,
        d,
        p,
        m_f_exact,
    })
}
