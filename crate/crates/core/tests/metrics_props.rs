use proptest::prelude::*;
use thanos_core::manifold::{feasibility, leading_left_singular_vectors, random_stiefel};
use thanos_core::metrics::{
    check_epsilon_stationary, global_gradient, read_csv, record, stationarity_residual, write_csv,
    MetricsWriter, CSV_HEADER,
};
use thanos_core::problem::{generate_gaussian_data, sparse_pca_problem, SparseReg};
use thanos_core::{AgentState, Matrix, RecordOptions, RunRecord};

fn state(id: usize, x: Matrix) -> AgentState {
    let z = Matrix::zeros(x.nrows(), x.ncols());
    AgentState { id, x, d: z.clone(), h: z, eta: 0.1 }
}

#[test]
fn identical_states_at_reference() {
    let data = generate_gaussian_data(5, 12, 3, 0.1, 1).unwrap();
    let prob = sparse_pca_problem(&data, 2, SparseReg::L1).unwrap();
    let x = random_stiefel(5, 2, 2).unwrap().into_inner();
    let states: Vec<_> = (0..3).map(|i| state(i, x.clone())).collect();
    let opts = RecordOptions { x_star: Some(&x), align_columns: false };
    let r = record(&states, &prob, 0.5, 0.1, 1, &opts);
    assert_eq!(r.dist, Some(0.0));
    assert!(r.feas < 1e-14);
    assert!(r.consensus < 1e-12);
}

#[test]
fn opposite_states_have_consensus_norm() {
    let data = generate_gaussian_data(4, 8, 2, 0.1, 1).unwrap();
    let prob = sparse_pca_problem(&data, 1, SparseReg::L21).unwrap();
    let p = Matrix::from_column_slice(4, 1, &[1.0, -2.0, 0.5, 3.0]);
    let states = vec![state(0, p.clone()), state(1, -p.clone())];
    let r = record(&states, &prob, 0.5, 0.1, 1, &RecordOptions::default());
    assert!((r.consensus - p.norm()).abs() < 1e-14);
    assert_eq!(r.dist, None);
}

#[test]
fn fields_match_naive_formulas() {
    let data = generate_gaussian_data(5, 15, 3, 0.2, 4).unwrap();
    let prob = sparse_pca_problem(&data, 2, SparseReg::L1).unwrap();
    let xs: Vec<Matrix> = (0..3).map(|i| random_stiefel(5, 2, 10 + i).unwrap().into_inner() * 1.1).collect();
    let star = random_stiefel(5, 2, 99).unwrap().into_inner();
    let states: Vec<_> = xs.iter().cloned().enumerate().map(|(i, x)| state(i, x)).collect();
    let r = record(&states, &prob, 0.3, 0.2, 5, &RecordOptions { x_star: Some(&star), align_columns: false });
    let xbar = (&xs[0] + &xs[1] + &xs[2]) / 3.0;
    let mut dist = 0.0;
    let mut feas = 0.0;
    let mut cons = 0.0;
    for x in &xs {
        let diff: f64 = x.iter().zip(star.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        dist += diff.sqrt() / 3.0;
        let g = x.transpose() * x - Matrix::identity(2, 2);
        feas += g.iter().map(|v| v * v).sum::<f64>().sqrt() / 3.0;
        cons += (x - &xbar).iter().map(|v| v * v).sum::<f64>().sqrt() / 3.0;
    }
    let g = global_gradient(&prob, &xbar, 0.3);
    let xtg = xbar.transpose() * &g;
    let proj = &g - &xbar * ((&xtg + xtg.transpose()) * 0.5);
    assert!((r.dist.unwrap() - dist).abs() < 1e-13);
    assert!((r.feas - feas).abs() < 1e-13);
    assert!((r.consensus - cons).abs() < 1e-13);
    assert!((r.stat_residual - proj.norm()).abs() < 1e-12);
    assert_eq!((r.k, r.sigma, r.eta), (5, 0.3, 0.2));
}

#[test]
fn column_alignment_removes_sign_flips() {
    let data = generate_gaussian_data(4, 8, 2, 0.1, 1).unwrap();
    let prob = sparse_pca_problem(&data, 2, SparseReg::L1).unwrap();
    let star = random_stiefel(4, 2, 3).unwrap().into_inner();
    let mut flipped = star.clone();
    flipped.column_mut(1).neg_mut();
    let states = vec![state(0, flipped)];
    let plain = record(&states, &prob, 0.5, 0.1, 1, &RecordOptions { x_star: Some(&star), align_columns: false });
    let aligned = record(&states, &prob, 0.5, 0.1, 1, &RecordOptions { x_star: Some(&star), align_columns: true });
    assert!((plain.dist.unwrap() - 2.0).abs() < 1e-12);
    assert!(aligned.dist.unwrap() < 1e-15);
}

#[test]
fn leading_eigenvector_is_certified() {
    let data = generate_gaussian_data(2, 10, 1, 0.0, 5).unwrap();
    let prob = sparse_pca_problem(&data, 1, SparseReg::L1).unwrap();
    let x = leading_left_singular_vectors(data.matrix(), 1).unwrap().into_inner();
    let cert = check_epsilon_stationary(&x, &prob, 1e-4, 1e-3).unwrap();
    assert!(cert.passed && cert.sigma_premise, "{cert:?}");
}

#[test]
fn zero_is_not_stationary() {
    let data = generate_gaussian_data(4, 10, 2, 0.1, 5).unwrap();
    let prob = sparse_pca_problem(&data, 3, SparseReg::L1).unwrap();
    let cert = check_epsilon_stationary(&Matrix::zeros(4, 3), &prob, 0.1, 1.0).unwrap();
    assert!((cert.feas - 3f64.sqrt()).abs() < 1e-15);
    assert!(!cert.passed);
}

#[test]
fn csv_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    write_csv(&[], &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), format!("{CSV_HEADER}\n"));

    let rec = |k| RunRecord { k, dist: None, feas: 0.1, consensus: 0.2, stat_residual: 0.3, sigma: 0.4, eta: 0.5 };
    let three = dir.path().join("three.csv");
    write_csv(&[rec(1), rec(2), rec(3)], &three).unwrap();
    let text = std::fs::read_to_string(&three).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("1,,"));
}

#[test]
fn writer_flushes_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut w = MetricsWriter::create(&path).unwrap();
    let r = RunRecord { k: 1, dist: Some(1.0), feas: 0.0, consensus: 0.0, stat_residual: 0.0, sigma: 1.0, eta: 1.0 };
    w.write(&r).unwrap();
    // Still open: the row must already be on disk.
    assert_eq!(read_csv(&path).unwrap(), vec![r]);
}

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..10.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn csv_round_trip(k in 1usize..10_000, dist in proptest::option::of(unit()), vals in proptest::collection::vec(unit(), 5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = RunRecord { k, dist, feas: vals[0], consensus: vals[1], stat_residual: vals[2], sigma: vals[3], eta: vals[4] };
        write_csv(&[r], &path).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        let b = back[0];
        prop_assert_eq!(b.k, r.k);
        prop_assert_eq!(b.dist.is_some(), r.dist.is_some());
        if let (Some(x), Some(y)) = (b.dist, r.dist) {
            prop_assert!((x - y).abs() <= 1e-15 * y.max(1.0));
        }
        for (x, y) in [(b.feas, r.feas), (b.consensus, r.consensus), (b.stat_residual, r.stat_residual), (b.sigma, r.sigma), (b.eta, r.eta)] {
            prop_assert!((x - y).abs() <= 1e-15 * y.max(1.0));
        }
    }

    #[test]
    fn residual_ignores_symmetric_normal_component(seed in 0u64..1000, s in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let data = generate_gaussian_data(5, 12, 3, 0.2, seed).unwrap();
        let prob = sparse_pca_problem(&data, 2, SparseReg::L21).unwrap();
        let x = random_stiefel(5, 2, seed + 1).unwrap().into_inner();
        let sm = Matrix::from_row_slice(2, 2, &[s[0], s[1], s[1], s[3]]);
        let g = global_gradient(&prob, &x, 0.5);
        let shifted = &g + &x * sm;
        let proj = |g: &Matrix| {
            let xtg = x.transpose() * g;
            (g - &x * ((&xtg + xtg.transpose()) * 0.5)).norm()
        };
        prop_assert!((proj(&shifted) - stationarity_residual(&prob, &x, 0.5)).abs() < 1e-12);
        prop_assert!(feasibility(&x) < 1e-13);
    }

    #[test]
    fn prox_gap_is_bounded(seed in 0u64..1000, sigma in 1e-3f64..5.0, scale in 0.1f64..20.0) {
        let data = generate_gaussian_data(5, 12, 3, 0.7, seed).unwrap();
        let x = random_stiefel(5, 2, seed + 4).unwrap().into_inner() * scale;
        for reg in [SparseReg::L1, SparseReg::L21] {
            let prob = sparse_pca_problem(&data, 2, reg).unwrap();
            let cert = check_epsilon_stationary(&x, &prob, sigma, 1.0).unwrap();
            prop_assert!(cert.max_prox_gap <= 2.0 * sigma * prob.lg() + 1e-12);
        }
    }
}
