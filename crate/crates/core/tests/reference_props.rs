use thanos_core::manifold::{feasibility, leading_left_singular_vectors};
use thanos_core::metrics::check_epsilon_stationary;
use thanos_core::problem::{generate_gaussian_data, sparse_pca_problem, SparseReg};
use thanos_core::reference::solve_centralized;
use thanos_core::ReferenceOptions;

#[test]
fn reference_is_epsilon_stationary() {
    let tol = 1e-4;
    let data = generate_gaussian_data(10, 80, 4, 0.1, 3).unwrap();
    for reg in [SparseReg::L1, SparseReg::L21] {
        let prob = sparse_pca_problem(&data, 3, reg).unwrap();
        let sigma = 10.0 * tol / (2.0 * prob.lg());
        let x0 = leading_left_singular_vectors(data.matrix(), 3).unwrap().into_inner();
        let opts = ReferenceOptions { sigma_final: sigma, tol, ..ReferenceOptions::default() };
        let res = solve_centralized(&prob, &x0, &opts).unwrap();
        assert!(res.converged, "{reg:?}: residual {}", res.residual);
        assert!(feasibility(res.x_star.value()) <= 1e-10);
        let cert = check_epsilon_stationary(res.x_star.value(), &prob, sigma, 10.0 * tol).unwrap();
        assert!(cert.passed && cert.sigma_premise, "{reg:?}: {cert:?}");
    }
}

#[test]
fn sparse_objective_below_pca_plus_penalty() {
    let data = generate_gaussian_data(10, 80, 4, 0.1, 8).unwrap();
    let prob = sparse_pca_problem(&data, 3, SparseReg::L1).unwrap();
    let pca = leading_left_singular_vectors(data.matrix(), 3).unwrap().into_inner();
    let res = solve_centralized(&prob, &pca, &ReferenceOptions { tol: 1e-7, ..ReferenceOptions::default() }).unwrap();
    // objective(X_pca) is exactly the pure-PCA optimum plus μ r(X_pca).
    assert!(res.final_objective <= prob.objective(&pca) + 1e-9);
}
