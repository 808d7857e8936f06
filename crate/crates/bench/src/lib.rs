//! Seeded fixtures shared by the benchmarks.

use thanos_core::manifold::leading_left_singular_vectors;
use thanos_core::network::{erdos_renyi, metropolis_weights};
use thanos_core::problem::{generate_gaussian_data, sparse_pca_problem};
use thanos_core::tracker::initialize;
use thanos_core::{AgentState, DecentralizedProblem, Matrix, MixingMatrix, SolverConfig, SparseReg};

pub struct Fixture {
    pub problem: DecentralizedProblem,
    pub mixing: MixingMatrix,
    pub config: SolverConfig,
    pub x_init: Matrix,
    pub states: Vec<AgentState>,
}

/// Sparse PCA with `m = 10 d` samples on an Erdős–Rényi graph.
pub fn sparse_pca(n: usize, d: usize, p: usize, reg: SparseReg) -> Fixture {
    let data = generate_gaussian_data(n, 10 * d, d, 0.1, 2024).expect("valid sizes");
    let problem = sparse_pca_problem(&data, p, reg).expect("valid sizes");
    let mixing = metropolis_weights(&erdos_renyi(d, 0.5, 2024).expect("connected")).expect("valid graph");
    let x_init = leading_left_singular_vectors(data.matrix(), p).expect("full rank").into_inner();
    let config = SolverConfig::default();
    let states = initialize(&problem, &config, &x_init).expect("consistent shapes");
    Fixture { problem, mixing, config, x_init, states }
}
