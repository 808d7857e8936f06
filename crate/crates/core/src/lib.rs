//! Decentralized non-smooth optimization over the Stiefel manifold.
//!
//! Agents on a static communication graph jointly minimize
//! `Σ_i f_i(X) + g_i(X)` subject to `XᵀX = I`, where each `f_i` is smooth and
//! each `g_i` is convex, Lipschitz and possibly non-smooth. Each `g_i` is
//! replaced by its Moreau envelope and the smoothed problem is solved by a
//! retraction-free gradient-tracking iteration in which every agent talks
//! only to its neighbors.
//!
//! The crate is organised bottom-up:
//!
//! - [`manifold`]: tangent projection, feasibility, polar retraction.
//! - [`smoothing`]: regularizers, proximal maps, envelope gradients, σ schedules.
//! - [`problem`]: agent objectives and the sparse-PCA instance.
//! - [`network`]: graphs, Metropolis mixing matrices, neighbor exchange.
//! - [`tracker`]: the iteration itself, BB steps and parameter bounds.
//! - [`metrics`]: per-round measurements, stationarity certificates, CSV logs.
//! - [`reference`]: a centralized solver for reference points and test oracles.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod manifold;
pub mod matrix_io;
pub mod metrics;
pub mod network;
pub mod problem;
pub mod reference;
pub mod smoothing;
pub mod tracker;

pub use error::{Error, Result};
pub use manifold::{Matrix, StiefelPoint};
pub use metrics::{RecordOptions, RunRecord, StationarityCertificate};
pub use network::{Graph, MixingMatrix};
pub use problem::{Agent, DecentralizedProblem, SmoothLoss, SparsePcaData, SparseReg};
pub use reference::{ReferenceOptions, ReferenceResult};
pub use smoothing::{Regularizer, SigmaSchedule};
pub use tracker::{AgentState, BbBounds, ParameterBounds, RunOutput, SolverConfig, StepSize};
