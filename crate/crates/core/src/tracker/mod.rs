//! Decentralized smoothing gradient tracking.
//!
//! Every agent keeps a local iterate `X_i`, a tracker `D_i` of the
//! network-average descent direction, and its own last direction `H_i`. One
//! synchronous round is
//!
//! ```text
//! X_i+ = Σ_j W(i,j) (X_j − η_j D_j)
//! H_i+ = β X_i+ (X_i+ᵀ X_i+ − I) + R_i(X_i+)
//! D_i+ = Σ_j W(i,j) D_j + H_i+ − H_i
//! ```
//!
//! where `R_i(X) = ½ G_i(X)(3I − XᵀX) − X sym(Xᵀ G_i(X))` and
//! `G_i = ∇f_i + ∇env_{σ,g_i}`. The iterates are never retracted.

mod bounds;
mod stepsize;

pub use bounds::{
    beta_lower, condition1_bounds, estimate_m_f, eta_upper, grad_sup_radius, l_r, m_g,
    ParameterBounds, GRAD_SUP_SAMPLES,
};
pub use stepsize::{bb_stepsize, BbBounds, StepSize, BB_DENOMINATOR_FLOOR};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{sym_unchecked, Matrix};
use crate::metrics::{self, RecordOptions, RunRecord};
use crate::network::MixingMatrix;
use crate::problem::{Agent, DecentralizedProblem};
use crate::smoothing::{check_sigma, SigmaSchedule};

/// Local state of one agent between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub x: Matrix,
    pub d: Matrix,
    pub h: Matrix,
    /// Stepsize this agent applies in the next round.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step_size: StepSize,
    pub beta: f64,
    pub sigma: SigmaSchedule,
    pub max_iters: usize,
    /// Stop once the stationarity residual of the averaged iterate falls to
    /// this value. Zero runs all `max_iters` rounds.
    pub stop_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: StepSize::default(),
            beta: 1.0,
            sigma: SigmaSchedule::default(),
            max_iters: 1000,
            stop_tol: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.step_size.validate()?;
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "penalty beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::Config(format!(
                "stop_tol must be nonnegative, got {}",
                self.stop_tol
            )));
        }
        check_sigma(self.sigma.sigma_at(0)).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `G_i(X) = ∇f_i(X) + ∇env_{σ,g_i}(X)`.
pub fn local_gradient(agent: &Agent, x: &Matrix, sigma: f64) -> Result<Matrix> {
    check_sigma(sigma)?;
    Ok(local_gradient_unchecked(agent, x, sigma))
}

pub(crate) fn local_gradient_unchecked(agent: &Agent, x: &Matrix, sigma: f64) -> Matrix {
    let mut g = agent.loss.grad(x);
    if agent.reg.weight() != 0.0 {
        g += agent.reg.env_grad_unchecked(sigma, x);
    }
    g
}

/// `R(X) = ½ G (3I − XᵀX) − X sym(XᵀG)` for a given gradient `G`.
pub fn r_term(x: &Matrix, g: &Matrix) -> Matrix {
    let p = x.ncols();
    let gram = x.tr_mul(x);
    let three_minus = Matrix::identity(p, p) * 3.0 - &gram;
    g * three_minus * 0.5 - x * sym_unchecked(&x.tr_mul(g))
}

/// `β X(XᵀX − I)`.
pub fn penalty_term(x: &Matrix, beta: f64) -> Matrix {
    let p = x.ncols();
    let gram = x.tr_mul(x) - Matrix::identity(p, p);
    x * gram * beta
}

/// Local descent direction `H_i(X) = β X(XᵀX − I) + R_i(X)`.
pub fn descent_direction(agent: &Agent, x: &Matrix, sigma: f64, beta: f64) -> Result<Matrix> {
    check_sigma(sigma)?;
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("penalty beta must be positive, got {beta}")));
    }
    Ok(descent_direction_unchecked(agent, x, sigma, beta))
}

pub(crate) fn descent_direction_unchecked(agent: &Agent, x: &Matrix, sigma: f64, beta: f64) -> Matrix {
    let g = local_gradient_unchecked(agent, x, sigma);
    penalty_term(x, beta) + r_term(x, &g)
}

fn check_inputs(problem: &DecentralizedProblem, mixing: &MixingMatrix) -> Result<()> {
    if problem.d() != mixing.d() {
        return Err(Error::Dimension(format!(
            "problem has {} agents but the mixing matrix is {}x{}",
            problem.d(),
            mixing.d(),
            mixing.d()
        )));
    }
    Ok(())
}

/// Every agent starts at `x_init` with `D_i = H_i(x_init)` at `σ^(0)`.
pub fn initialize(
    problem: &DecentralizedProblem,
    config: &SolverConfig,
    x_init: &Matrix,
) -> Result<Vec<AgentState>> {
    config.validate()?;
    problem.check_shape(x_init)?;
    let sigma = config.sigma.sigma_at(0);
    let eta = config.step_size.initial();
    Ok(problem
        .agents()
        .par_iter()
        .enumerate()
        .map(|(id, agent)| {
            let h = descent_direction_unchecked(agent, x_init, sigma, config.beta);
            AgentState {
                id,
                x: x_init.clone(),
                d: h.clone(),
                h,
                eta,
            }
        })
        .collect())
}

/// One synchronous round from iteration `k` to `k + 1`.
pub fn step(
    problem: &DecentralizedProblem,
    mixing: &MixingMatrix,
    config: &SolverConfig,
    states: &[AgentState],
    k: usize,
) -> Result<Vec<AgentState>> {
    check_inputs(problem, mixing)?;
    let sigma_next = config.sigma.sigma_at(k + 1);
    step_with_sigma(problem, mixing, config.beta, &config.step_size, states, k, sigma_next)
}

/// Round `k → k + 1` with an explicit smoothing parameter for the new
/// directions. Reads only round-`k` state.
pub(crate) fn step_with_sigma(
    problem: &DecentralizedProblem,
    mixing: &MixingMatrix,
    beta: f64,
    step_size: &StepSize,
    states: &[AgentState],
    k: usize,
    sigma_next: f64,
) -> Result<Vec<AgentState>> {
    if states.len() != problem.d() {
        return Err(Error::Dimension(format!(
            "expected {} agent states, got {}",
            problem.d(),
            states.len()
        )));
    }
    // What each agent sends to its neighbors.
    let payloads: Vec<Matrix> = states.par_iter().map(|s| &s.x - &s.d * s.eta).collect();
    let trackers: Vec<&Matrix> = states.iter().map(|s| &s.d).collect();

    let next: Vec<Result<AgentState>> = problem
        .agents()
        .par_iter()
        .zip(states.par_iter())
        .enumerate()
        .map(|(i, (agent, old))| {
            let x = mixing.mix_row_by(i, |j| &payloads[j]);
            let h = descent_direction_unchecked(agent, &x, sigma_next, beta);
            let d = mixing.mix_row_by(i, |j| trackers[j]) + &h - &old.h;
            let finite = |m: &Matrix| m.iter().all(|v| v.is_finite());
            if !(finite(&x) && finite(&h) && finite(&d)) {
                return Err(Error::Divergence {
                    iteration: k + 1,
                    agent: old.id,
                });
            }
            let eta = match step_size {
                StepSize::Fixed(eta) => *eta,
                StepSize::Bb(bounds) => {
                    stepsize::bb_from_secant(&(&x - &old.x), &(&h - &old.h), k + 1, old.eta, bounds)
                }
            };
            Ok(AgentState {
                id: old.id,
                x,
                d,
                h,
                eta,
            })
        })
        .collect();
    next.into_iter().collect()
}

/// Final states and the per-round metrics of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub states: Vec<AgentState>,
    pub records: Vec<RunRecord>,
}

/// Runs the algorithm from a common starting point, collecting one record
/// per round.
pub fn run(
    problem: &DecentralizedProblem,
    mixing: &MixingMatrix,
    config: &SolverConfig,
    x_init: &Matrix,
    opts: &RecordOptions<'_>,
) -> Result<RunOutput> {
    run_with(problem, mixing, config, x_init, opts, |_| Ok(()))
}

/// Like [`run`], handing each record to `sink` as soon as it is computed. If
/// the run diverges, every record emitted before the failure has already been
/// passed to `sink`.
pub fn run_with(
    problem: &DecentralizedProblem,
    mixing: &MixingMatrix,
    config: &SolverConfig,
    x_init: &Matrix,
    opts: &RecordOptions<'_>,
    mut sink: impl FnMut(&RunRecord) -> Result<()>,
) -> Result<RunOutput> {
    check_inputs(problem, mixing)?;
    let mut states = initialize(problem, config, x_init)?;
    let mut records = Vec::with_capacity(config.max_iters);
    for k in 0..config.max_iters {
        let eta_used = states.iter().map(|s| s.eta).sum::<f64>() / states.len() as f64;
        states = step(problem, mixing, config, &states, k)?;
        let sigma = config.sigma.sigma_at(k + 1);
        let rec = metrics::record(&states, problem, sigma, eta_used, k + 1, opts);
        sink(&rec)?;
        let done = config.stop_tol > 0.0 && rec.stat_residual <= config.stop_tol;
        records.push(rec);
        if done {
            break;
        }
    }
    Ok(RunOutput { states, records })
}

/// Mean of the local iterates.
pub fn average(states: &[AgentState]) -> Matrix {
    let mut acc = states[0].x.clone();
    for s in &states[1..] {
        acc += &s.x;
    }
    acc / states.len() as f64
}
