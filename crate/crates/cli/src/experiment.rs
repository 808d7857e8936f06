//! The end-to-end pipeline: data, graph, mixing matrix, initial point,
//! reference point, then a streamed run.

use std::fmt::Write as _;
use std::path::PathBuf;

use thanos_core::manifold::{leading_left_singular_vectors, random_stiefel};
use thanos_core::metrics::MetricsWriter;
use thanos_core::network::{complete, erdos_renyi, metropolis_weights, ring, star};
use thanos_core::problem::{generate_gaussian_data, load_data_csv, sparse_pca_problem};
use thanos_core::reference::{load_reference, solve_centralized};
use thanos_core::tracker::{condition1_bounds, run_with};
use thanos_core::{
    DecentralizedProblem, Error, Graph, Matrix, MixingMatrix, RecordOptions, RunRecord, SparsePcaData,
    StepSize,
};

use crate::config::{DataSource, ExperimentConfig, GraphKind, InitConfig};
use crate::CliError;

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub metrics: Option<PathBuf>,
    /// Treat the first row of a CSV data file as a header.
    pub csv_header: bool,
    pub align_columns: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub metrics: PathBuf,
    pub rounds: usize,
    pub last: Option<RunRecord>,
    /// Residual of the reference point, when one was computed this run.
    pub reference_residual: Option<f64>,
    pub reference_loaded: bool,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rounds: {}", self.rounds)?;
        if self.reference_loaded {
            writeln!(f, "reference: loaded")?;
        }
        if let Some(r) = self.reference_residual {
            writeln!(f, "reference residual: {r:.3e}")?;
        }
        if let Some(r) = &self.last {
            if let Some(d) = r.dist {
                writeln!(f, "dist: {d:.6e}")?;
            }
            writeln!(f, "feas: {:.6e}", r.feas)?;
            writeln!(f, "consensus: {:.6e}", r.consensus)?;
            writeln!(f, "stat_residual: {:.6e}", r.stat_residual)?;
        }
        write!(f, "metrics: {}", self.metrics.display())
    }
}

fn ingestion(e: Error) -> CliError {
    match e {
        Error::Config(_) => CliError::config(e.to_string()),
        e => CliError::Ingestion(e),
    }
}

fn build(e: Error) -> CliError {
    CliError::config(e.to_string())
}

fn load_data(config: &ExperimentConfig, overrides: &RunOverrides) -> Result<SparsePcaData, CliError> {
    let p = &config.problem;
    let data = match &p.data {
        DataSource::Generate { seed } => {
            // Both are required by validation for generated data.
            let (n, m) = (p.n.unwrap_or(0), p.m.unwrap_or(0));
            generate_gaussian_data(n, m, p.d, p.mu, *seed).map_err(build)?
        }
        DataSource::Csv { path, header } => {
            load_data_csv(path, p.d, p.mu, *header || overrides.csv_header).map_err(ingestion)?
        }
    };
    let mut errors = Vec::new();
    for (key, want, got) in [("n", p.n, data.n()), ("m", p.m, data.m())] {
        if let Some(want) = want.filter(|&w| w != got) {
            errors.push(format!("problem.{key}: config says {want} but the data has {got}"));
        }
    }
    if p.p > data.n() {
        errors.push(format!("problem.p: must not exceed n = {}, got {}", data.n(), p.p));
    }
    if errors.is_empty() {
        Ok(data)
    } else {
        Err(CliError::Config(errors))
    }
}

fn build_graph(config: &ExperimentConfig) -> Result<Graph, CliError> {
    let d = config.problem.d;
    let graph = match &config.graph.kind {
        GraphKind::ErdosRenyi { prob, seed } => erdos_renyi(d, *prob, *seed).map_err(build)?,
        GraphKind::Ring => ring(d).map_err(build)?,
        GraphKind::Complete => complete(d).map_err(build)?,
        GraphKind::Star => star(d).map_err(build)?,
        GraphKind::File(path) => Graph::read_edge_list(path).map_err(ingestion)?,
    };
    if graph.d() != d {
        return Err(CliError::config(format!(
            "graph.path: the edge list has {} agents but problem.d = {d}",
            graph.d()
        )));
    }
    if let Some(path) = &config.graph.export {
        graph.write_edge_list(path).map_err(CliError::Other)?;
    }
    Ok(graph)
}

fn initial_point(config: &ExperimentConfig, data: &SparsePcaData) -> Result<Matrix, CliError> {
    let p = config.problem.p;
    let x = match config.init {
        InitConfig::Svd => leading_left_singular_vectors(data.matrix(), p),
        InitConfig::Random { seed } => random_stiefel(data.n(), p, seed),
    };
    x.map(|x| x.into_inner()).map_err(CliError::Other)
}

/// Loads the stored reference if it exists, otherwise solves for one when
/// enabled and saves it if a path is configured.
fn reference_point(
    config: &ExperimentConfig,
    problem: &DecentralizedProblem,
    x_init: &Matrix,
) -> Result<(Option<Matrix>, Option<f64>), CliError> {
    let stored = config.output.reference.as_ref();
    if let Some(path) = stored.filter(|p| p.exists()) {
        let x = load_reference(path).map_err(ingestion)?.into_inner();
        if x.shape() != (problem.n(), problem.p()) {
            return Err(CliError::config(format!(
                "output.reference: {} holds a {}x{} matrix, expected {}x{}",
                path.display(),
                x.nrows(),
                x.ncols(),
                problem.n(),
                problem.p()
            )));
        }
        return Ok((Some(x), None));
    }
    if !config.reference.enabled {
        return Ok((None, None));
    }
    let res = solve_centralized(problem, x_init, &config.reference.options).map_err(CliError::Other)?;
    if let Some(path) = stored {
        res.save(path).map_err(CliError::Other)?;
    }
    Ok((Some(res.x_star.into_inner()), Some(res.residual)))
}

/// Runs the configured experiment, streaming one CSV row per round. The
/// metrics file is created only after every input has been loaded and
/// validated, so a failed load leaves no output behind.
pub fn run_experiment(config: &ExperimentConfig, overrides: &RunOverrides) -> Result<RunSummary, CliError> {
    let data = load_data(config, overrides)?;
    let problem = sparse_pca_problem(&data, config.problem.p, config.problem.reg).map_err(build)?;
    let graph = build_graph(config)?;
    let mixing = metropolis_weights(&graph).map_err(build)?;
    config.solver.validate().map_err(build)?;
    let x_init = initial_point(config, &data)?;
    let (x_star, reference_residual) = reference_point(config, &problem, &x_init)?;

    let metrics = overrides.metrics.clone().unwrap_or_else(|| config.output.metrics.clone());
    let opts = RecordOptions {
        x_star: x_star.as_ref(),
        align_columns: config.output.align_columns || overrides.align_columns,
    };
    let mut writer = MetricsWriter::create(&metrics).map_err(CliError::Other)?;
    let out = run_with(&problem, &mixing, &config.solver, &x_init, &opts, |r| writer.write(r)).map_err(
        |e| match e {
            Error::Divergence { .. } => CliError::Divergence(e),
            e => CliError::Other(e),
        },
    )?;
    Ok(RunSummary {
        metrics,
        rounds: out.records.len(),
        last: out.records.last().copied(),
        reference_residual,
        reference_loaded: x_star.is_some() && reference_residual.is_none(),
    })
}

fn problem_and_mixing(config: &ExperimentConfig) -> Result<(DecentralizedProblem, MixingMatrix), CliError> {
    let data = load_data(config, &RunOverrides::default())?;
    let problem = sparse_pca_problem(&data, config.problem.p, config.problem.reg).map_err(build)?;
    let mixing = metropolis_weights(&build_graph(config)?).map_err(build)?;
    Ok((problem, mixing))
}

/// Evaluates the sufficient parameter conditions at `σ^(0)` and reports
/// whether the configured `β` and `η` meet them. For BB steps the check
/// applies to the largest allowed step.
pub fn bounds_report(config: &ExperimentConfig) -> Result<String, CliError> {
    let (problem, mixing) = problem_and_mixing(config)?;
    let sigma = config.solver.sigma.sigma_at(0);
    let b = condition1_bounds(&problem, sigma, &mixing).map_err(build)?;
    let beta = config.solver.beta;
    let (eta_name, eta) = match config.solver.step_size {
        StepSize::Fixed(eta) => ("eta", eta),
        StepSize::Bb(bb) => ("eta_max", bb.max),
    };
    let verdict = |ok: bool| if ok { "ok" } else { "violated" };
    let mut s = String::new();
    let m_f_kind = if b.m_f_exact { "exact" } else { "sampled" };
    // Writing into a String cannot fail.
    let _ = writeln!(s, "d = {}, p = {}, sigma = {sigma:e}", b.d, b.p);
    let _ = writeln!(s, "lambda = {:.6e}", b.lambda);
    let _ = writeln!(s, "M_f = {:.6e} ({m_f_kind})", b.m_f);
    let _ = writeln!(s, "M_g = {:.6e}", b.m_g);
    let _ = writeln!(s, "L_r = {:.6e}", b.l_r);
    let _ = writeln!(s, "beta_lower = {:.6e}", b.beta_lower);
    let _ = writeln!(s, "eta_upper = {:.6e}", b.eta_upper);
    let _ = writeln!(s, "beta = {beta:e}: {}", verdict(b.beta_ok(beta)));
    let _ = write!(
        s,
        "{eta_name} = {eta:e} (bound at beta: {:.6e}): {}",
        b.eta_upper_at(beta),
        verdict(b.eta_ok(beta, eta))
    );
    Ok(s)
}
