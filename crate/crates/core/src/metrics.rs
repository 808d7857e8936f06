//! Measurements taken on a run.
//!
//! Quantities evaluated at the averaged iterate `X̄` use every agent's
//! function. That is an outside observer's view, used for reporting only;
//! the update rule in [`crate::tracker`] never sees it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::manifold::{feasibility, proj_tangent_unchecked, Matrix};
use crate::problem::DecentralizedProblem;
use crate::smoothing::check_sigma;
use crate::tracker::{average, local_gradient_unchecked, r_term, AgentState};

/// Exact CSV header of metrics logs.
pub const CSV_HEADER: &str = "k,dist,feas,consensus,stat_residual,sigma,eta";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub k: usize,
    /// Mean `‖X_i − X*‖_F`, when a reference is known.
    pub dist: Option<f64>,
    /// Mean `‖X_iᵀX_i − I‖_F`.
    pub feas: f64,
    /// Mean `‖X_i − X̄‖_F`.
    pub consensus: f64,
    /// `‖proj_X̄(G(X̄))‖_F`.
    pub stat_residual: f64,
    pub sigma: f64,
    /// Mean stepsize over agents for this round.
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RecordOptions<'a> {
    pub x_star: Option<&'a Matrix>,
    /// Flip each column of `X_i` to agree in sign with `X*` before measuring
    /// `dist`.
    pub align_columns: bool,
}

/// `G(X) = Σ_i ∇f_i(X) + ∇env_{σ,g_i}(X)`.
pub fn global_gradient(problem: &DecentralizedProblem, x: &Matrix, sigma: f64) -> Matrix {
    let mut g = Matrix::zeros(x.nrows(), x.ncols());
    for agent in problem.agents() {
        g += local_gradient_unchecked(agent, x, sigma);
    }
    g
}

/// `‖proj_X(G(X))‖_F`.
pub fn stationarity_residual(problem: &DecentralizedProblem, x: &Matrix, sigma: f64) -> f64 {
    proj_tangent_unchecked(x, &global_gradient(problem, x, sigma)).norm()
}

/// `‖R(X)‖_F` with `R = Σ_i R_i`. Each `R_i` is linear in `G_i`, so this
/// equals `R` applied to the global gradient.
pub fn r_norm(problem: &DecentralizedProblem, x: &Matrix, sigma: f64) -> f64 {
    r_term(x, &global_gradient(problem, x, sigma)).norm()
}

fn aligned_distance(x: &Matrix, x_star: &Matrix, align: bool) -> f64 {
    if !align {
        return (x - x_star).norm();
    }
    let mut acc = 0.0;
    for (c, star) in x_star.column_iter().enumerate() {
        let col = x.column(c);
        let sign = if col.dot(&star) < 0.0 { -1.0 } else { 1.0 };
        acc += (col * sign - star).norm_squared();
    }
    acc.sqrt()
}

pub fn record(
    states: &[AgentState],
    problem: &DecentralizedProblem,
    sigma: f64,
    eta: f64,
    k: usize,
    opts: &RecordOptions<'_>,
) -> RunRecord {
    let d = states.len() as f64;
    let xbar = average(states);
    let mean = |f: &dyn Fn(&AgentState) -> f64| states.iter().map(f).sum::<f64>() / d;
    RunRecord {
        k,
        dist: opts
            .x_star
            .map(|xs| mean(&|s| aligned_distance(&s.x, xs, opts.align_columns))),
        feas: mean(&|s| feasibility(&s.x)),
        consensus: mean(&|s| (&s.x - &xbar).norm()),
        stat_residual: stationarity_residual(problem, &xbar, sigma),
        sigma,
        eta,
    }
}

/// `(‖R(X̄)‖², ‖X̄ᵀX̄ − I‖²)`, the two quantities whose running minima decay
/// like `1/K`.
pub fn rate_quantities(states: &[AgentState], problem: &DecentralizedProblem, sigma: f64) -> (f64, f64) {
    let xbar = average(states);
    (r_norm(problem, &xbar, sigma).powi(2), feasibility(&xbar).powi(2))
}

/// Certificate that `X` is an ε-stationary point of the non-smooth problem,
/// with `Y_i = prox_{σ,g_i}(X)` and subgradients `(X − Y_i)/σ ∈ ∂g_i(Y_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCertificate {
    pub epsilon: f64,
    pub grad_residual: f64,
    pub max_prox_gap: f64,
    pub feas: f64,
    pub passed: bool,
    /// Whether `σ ≤ ε / (2 L_g)`.
    pub sigma_premise: bool,
}

pub fn check_epsilon_stationary(
    x: &Matrix,
    problem: &DecentralizedProblem,
    sigma: f64,
    epsilon: f64,
) -> Result<StationarityCertificate> {
    check_sigma(sigma)?;
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    problem.check_shape(x)?;
    let grad_residual = stationarity_residual(problem, x, sigma);
    let max_prox_gap = problem
        .agents()
        .iter()
        .map(|a| (x - a.reg.prox_unchecked(sigma, x)).norm())
        .fold(0.0, f64::max);
    let feas = feasibility(x);
    let lg = problem.lg();
    Ok(StationarityCertificate {
        epsilon,
        grad_residual,
        max_prox_gap,
        feas,
        passed: grad_residual <= epsilon && max_prox_gap <= epsilon && feas <= epsilon,
        sigma_premise: lg == 0.0 || sigma <= epsilon / (2.0 * lg),
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Streams records to a CSV file, flushing after every row.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriter {
    /// Creates (or truncates) `path` and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path,
        };
        w.write_line(CSV_HEADER)?;
        Ok(w)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, r: &RunRecord) -> Result<()> {
        let line = format!(
            "{},{},{},{},{},{},{}",
            r.k,
            r.dist.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.feas),
            fmt_f64(r.consensus),
            fmt_f64(r.stat_residual),
            fmt_f64(r.sigma),
            fmt_f64(r.eta),
        );
        self.write_line(&line)
    }
}

pub fn write_csv<'a>(records: impl IntoIterator<Item = &'a RunRecord>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

/// Parses a metrics log written by [`MetricsWriter`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected header {CSV_HEADER:?}"),
        });
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                line: line_no,
                column: fields.len().min(7) + 1,
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let num = |col: usize| -> Result<f64> {
            fields[col].parse().map_err(|_| Error::Ingestion {
                path: path.to_path_buf(),
                line: line_no,
                column: col + 1,
                message: format!("not a number: {:?}", fields[col]),
            })
        };
        let k = fields[0].parse().map_err(|_| Error::Ingestion {
            path: path.to_path_buf(),
            line: line_no,
            column: 1,
            message: format!("not an iteration index: {:?}", fields[0]),
        })?;
        out.push(RunRecord {
            k,
            dist: if fields[1].is_empty() { None } else { Some(num(1)?) },
            feas: num(2)?,
            consensus: num(3)?,
            stat_residual: num(4)?,
            sigma: num(5)?,
            eta: num(6)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::random_stiefel;
    use crate::problem::{generate_gaussian_data, sparse_pca_problem, SparseReg};

    fn state(id: usize, x: Matrix) -> AgentState {
        let z = Matrix::zeros(x.nrows(), x.ncols());
        AgentState {
            id,
            x,
            d: z.clone(),
            h: z,
            eta: 0.1,
        }
    }

    fn problem() -> DecentralizedProblem {
        let data = generate_gaussian_data(4, 8, 2, 0.1, 3).unwrap();
        sparse_pca_problem(&data, 2, SparseReg::L1).unwrap()
    }

    #[test]
    fn record_at_reference_is_zero() {
        let prob = problem();
        let xs = random_stiefel(4, 2, 1).unwrap().into_inner();
        let states = vec![state(0, xs.clone()), state(1, xs.clone())];
        let opts = RecordOptions {
            x_star: Some(&xs),
            align_columns: false,
        };
        let r = record(&states, &prob, 0.1, 0.1, 1, &opts);
        assert_eq!(r.dist, Some(0.0));
        assert!(r.feas < 1e-14);
        assert_eq!(r.consensus, 0.0);
    }

    #[test]
    fn consensus_of_opposite_states() {
        let prob = problem();
        let p = random_stiefel(4, 2, 2).unwrap().into_inner() * 1.7;
        let states = vec![state(0, p.clone()), state(1, -p.clone())];
        let r = record(&states, &prob, 0.1, 0.1, 1, &RecordOptions::default());
        assert!((r.consensus - p.norm()).abs() < 1e-14);
        assert_eq!(r.dist, None);
    }

    #[test]
    fn column_alignment_removes_sign_flips() {
        let xs = random_stiefel(4, 2, 2).unwrap().into_inner();
        let mut flipped = xs.clone();
        flipped.column_mut(1).neg_mut();
        assert!(aligned_distance(&flipped, &xs, false) > 1.9);
        assert!(aligned_distance(&flipped, &xs, true) < 1e-15);
    }

    #[test]
    fn zero_point_fails_feasibility() {
        let prob = problem();
        let cert = check_epsilon_stationary(&Matrix::zeros(4, 2), &prob, 0.1, 1.0).unwrap();
        assert!((cert.feas - 2f64.sqrt()).abs() < 1e-15);
        assert!(!cert.passed);
        assert!(check_epsilon_stationary(&Matrix::zeros(4, 2), &prob, 0.1, 2.0).unwrap().passed);
    }

    #[test]
    fn csv_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_csv(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));

        let rec = |k| RunRecord {
            k,
            dist: if k == 2 { None } else { Some(0.1 / k as f64) },
            feas: 1.0 / 3.0,
            consensus: 2e-300,
            stat_residual: std::f64::consts::PI,
            sigma: 0.5,
            eta: 1e-3,
        };
        let records = vec![rec(1), rec(2), rec(3)];
        write_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(2).unwrap().starts_with("2,,"));
        assert_eq!(read_csv(&path).unwrap(), records);
    }

    #[test]
    fn unwritable_path_reports_path() {
        match MetricsWriter::create("/nonexistent-dir/m.csv") {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("m.csv")),
            _ => panic!("expected an I/O error"),
        }
    }
}
