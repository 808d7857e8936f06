//! Centralized high-precision reference solutions and brute-force oracles.

use std::path::Path;

use crate::error::{Error, Result};
use crate::manifold::{retract, Matrix, StiefelPoint};
use crate::matrix_io::{read_matrix_csv, write_matrix_csv};
use crate::metrics::stationarity_residual;
use crate::network::MixingMatrix;
use crate::problem::DecentralizedProblem;
use crate::smoothing::{check_sigma, Regularizer};
use crate::tracker::{initialize, step_with_sigma, SolverConfig, StepSize};

/// Feasibility required of a stored reference point.
pub const REFERENCE_FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    pub sigma_final: f64,
    /// Target for `‖proj_X(G(X))‖_F` at the retracted iterate, with `σ = sigma_final`.
    pub tol: f64,
    pub max_iters: usize,
    /// Iterations spent at each halving of `σ`.
    pub stage_len: usize,
    pub beta: f64,
    pub step_size: StepSize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            sigma_final: 1e-4,
            tol: 1e-9,
            max_iters: 100_000,
            stage_len: 2000,
            beta: 1.0,
            step_size: StepSize::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceResult {
    pub x_star: StiefelPoint,
    pub final_objective: f64,
    pub iterations_used: usize,
    /// Stationarity residual at `x_star` with `σ = sigma_final`.
    pub residual: f64,
    pub converged: bool,
}

impl ReferenceResult {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(path, self.x_star.value())
    }
}

/// Loads a reference point saved with [`ReferenceResult::save`].
pub fn load_reference(path: impl AsRef<Path>) -> Result<StiefelPoint> {
    let path = path.as_ref();
    let m = read_matrix_csv(path, false)?;
    StiefelPoint::new(m, REFERENCE_FEASIBILITY_TOL).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// `σ_j = max(sigma_final, 0.5^j)` with `j = k / stage_len`.
fn staged_sigma(k: usize, opts: &ReferenceOptions) -> f64 {
    let j = (k / opts.stage_len.max(1)).min(1100) as i32;
    0.5f64.powi(j).max(opts.sigma_final)
}

/// Runs the single-agent dynamics on `Σ f_i + Σ g_i` with a halving
/// smoothing schedule, stopping once the retracted iterate is `tol`-stationary
/// for the original problem. Hitting `max_iters` returns the best retracted
/// iterate seen.
///
/// `σ` always refers to the per-agent smoothing of `problem`. The collapsed
/// agent smooths `Σ g_i` at `σ/d`, which reproduces `Σ_i ∇env_{σ,g_i}`
/// exactly when every agent carries the same regularizer weight.
pub fn solve_centralized(
    problem: &DecentralizedProblem,
    x_init: &Matrix,
    opts: &ReferenceOptions,
) -> Result<ReferenceResult> {
    check_sigma(opts.sigma_final)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let single = problem.collapse()?;
    let scale = problem.d() as f64;
    let w = MixingMatrix::from_dense(Matrix::identity(1, 1))?;
    let config = SolverConfig {
        step_size: opts.step_size,
        beta: opts.beta,
        sigma: crate::smoothing::SigmaSchedule::fixed(staged_sigma(0, opts) / scale)?,
        max_iters: opts.max_iters,
        stop_tol: 0.0,
    };
    let mut states = initialize(&single, &config, x_init)?;

    let mut best: Option<(f64, StiefelPoint, usize)> = None;
    let mut converged = false;
    let mut used = 0;
    for k in 0..opts.max_iters {
        let sigma = staged_sigma(k + 1, opts);
        states = step_with_sigma(&single, &w, opts.beta, &opts.step_size, &states, k, sigma / scale)?;
        used = k + 1;
        if sigma > opts.sigma_final {
            continue;
        }
        let Ok(q) = retract(&states[0].x) else { continue };
        let res = stationarity_residual(problem, q.value(), opts.sigma_final);
        if best.as_ref().is_none_or(|(r, _, _)| res < *r) {
            best = Some((res, q, used));
        }
        if res <= opts.tol {
            converged = true;
            break;
        }
    }
    let (residual, x_star) = match best {
        Some((r, q, _)) => (r, q),
        None => {
            let q = retract(&states[0].x)?;
            (stationarity_residual(problem, q.value(), opts.sigma_final), q)
        }
    };
    Ok(ReferenceResult {
        final_objective: problem.objective(x_star.value()),
        x_star,
        iterations_used: used,
        residual,
        converged,
    })
}

/// Largest input accepted by [`brute_force_prox`].
pub const BRUTE_FORCE_MAX_ENTRIES: usize = 4;

/// Grid search for `argmin_Y g(Y) + ‖Y − X‖²/(2σ)` over the product grid of
/// `grid_steps` points on `[x − r, x + r]` per entry.
pub fn brute_force_prox(
    g: &Regularizer,
    sigma: f64,
    x: &Matrix,
    grid_radius: f64,
    grid_steps: usize,
) -> Result<Matrix> {
    check_sigma(sigma)?;
    let entries = x.len();
    if entries > BRUTE_FORCE_MAX_ENTRIES {
        return Err(Error::OracleScale {
            max: BRUTE_FORCE_MAX_ENTRIES,
            got: entries,
        });
    }
    if grid_steps < 2 || !(grid_radius > 0.0) {
        return Err(Error::Parameter("grid needs at least 2 steps and a positive radius".into()));
    }
    let h = 2.0 * grid_radius / (grid_steps - 1) as f64;
    let coord = |e: usize, t: usize| x.as_slice()[e] - grid_radius + h * t as f64;

    let mut idx = vec![0usize; entries];
    let mut y = x.clone();
    let mut best = (f64::INFINITY, x.clone());
    loop {
        let mut quad = 0.0;
        for (e, &t) in idx.iter().enumerate() {
            let v = coord(e, t);
            y.as_mut_slice()[e] = v;
            quad += (v - x.as_slice()[e]).powi(2);
        }
        let val = g.value(&y) + quad / (2.0 * sigma);
        if val < best.0 {
            best = (val, y.clone());
        }
        // Advance the mixed-radix counter.
        let mut e = 0;
        loop {
            if e == entries {
                return Ok(best.1);
            }
            idx[e] += 1;
            if idx[e] < grid_steps {
                break;
            }
            idx[e] = 0;
            e += 1;
        }
    }
}
