//! Experiment configuration.
//!
//! A config is a TOML file with six sections. Every section and most keys are
//! optional; omitted keys take the defaults listed below. `problem.n` and
//! `problem.m` are required when the data is generated.
//!
//! ```toml
//! [problem]
//! n = 10              # required for generated data
//! m = 320             # required for generated data
//! d = 1
//! p = 1
//! mu = 0.1
//! reg = "l1"            # "l1" | "l21"
//! data = "generate"     # "generate" | "csv"
//! seed = 0              # generate only
//! # path = "a.csv"      # csv only; features as rows, samples as columns
//! # header = false      # csv only
//!
//! [graph]
//! kind = "er"           # "er" | "ring" | "complete" | "star" | "file"
//! prob = 0.5            # er only
//! seed = 0              # er only
//! # path = "g.txt"      # file only
//! # export = "g.txt"    # write the edge list used
//!
//! [solver]
//! max_iters = 1000
//! beta = 1.0
//! stop_tol = 0.0
//! step = "bb"           # "bb" | "fixed"
//! # eta = 0.01          # fixed only
//! eta_init = 1e-3       # bb only
//! eta_min = 1e-6        # bb only
//! eta_max = 0.05        # bb only
//! sigma_schedule = "fixed"  # "fixed" | "power"
//! sigma = 1.0           # fixed only
//! # sigma0 = 1.0        # power only: σ_0 = sigma0, σ_k = k^(-sigma_exponent) for k >= 1
//! # sigma_exponent = 0.3333333333333333
//!
//! [init]
//! kind = "svd"          # "svd" | "random"
//! # seed = 1            # random only
//!
//! [reference]
//! enabled = true
//! sigma_final = 1e-4
//! tol = 1e-9
//! max_iters = 100000
//! stage_len = 2000
//!
//! [output]
//! metrics = "metrics.csv"
//! # reference = "xstar.csv"   # loaded if present, otherwise computed and saved
//! align_columns = false
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use thanos_core::{BbBounds, ReferenceOptions, SigmaSchedule, SolverConfig, SparseReg, StepSize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Generate { seed: u64 },
    Csv { path: PathBuf, header: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    /// Required for generated data; checked against the file for CSV data.
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub d: usize,
    pub p: usize,
    pub mu: f64,
    pub reg: SparseReg,
    pub data: DataSource,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    ErdosRenyi { prob: f64, seed: u64 },
    Ring,
    Complete,
    Star,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitConfig {
    Svd,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub enabled: bool,
    pub options: ReferenceOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub metrics: PathBuf,
    pub reference: Option<PathBuf>,
    pub align_columns: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub graph: GraphConfig,
    pub solver: SolverConfig,
    pub init: InitConfig,
    pub reference: ReferenceConfig,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 6] = ["problem", "graph", "solver", "init", "reference", "output"];

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses and fully validates a config. Paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config(format!("TOML syntax: {}", e.message())))?;
        let mut errors = Vec::new();
        for key in root.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                errors.push(format!("{key}: unknown section"));
            }
        }
        let empty = Table::new();
        let section = |name: &str, errors: &mut Vec<String>| match root.get(name) {
            None => empty.clone(),
            Some(Value::Table(t)) => t.clone(),
            Some(_) => {
                errors.push(format!("{name}: expected a table"));
                empty.clone()
            }
        };
        let problem = section("problem", &mut errors);
        let graph = section("graph", &mut errors);
        let solver = section("solver", &mut errors);
        let init = section("init", &mut errors);
        let reference = section("reference", &mut errors);
        let output = section("output", &mut errors);

        let problem = parse_problem(&mut Fields::new(&problem, "problem", &mut errors), base);
        let graph = parse_graph(&mut Fields::new(&graph, "graph", &mut errors), base, problem.as_ref());
        let solver = parse_solver(&mut Fields::new(&solver, "solver", &mut errors));
        let init = parse_init(&mut Fields::new(&init, "init", &mut errors));
        let reference = parse_reference(&mut Fields::new(&reference, "reference", &mut errors));
        let output = parse_output(&mut Fields::new(&output, "output", &mut errors), base);

        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        // Every parser returns Some when it recorded no violation.
        Ok(Self {
            problem: problem.expect("validated"),
            graph: graph.expect("validated"),
            solver: solver.expect("validated"),
            init: init.expect("validated"),
            reference: reference.expect("validated"),
            output: output.expect("validated"),
        })
    }
}

/// Typed access to one section, recording violations under `section.key`.
struct Fields<'a> {
    table: &'a Table,
    section: &'static str,
    errors: &'a mut Vec<String>,
    used: Vec<&'static str>,
    start: usize,
}

impl<'a> Fields<'a> {
    fn new(table: &'a Table, section: &'static str, errors: &'a mut Vec<String>) -> Self {
        let start = errors.len();
        Self { table, section, errors, used: Vec::new(), start }
    }

    fn fail(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.section));
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.get(key)
    }

    fn int(&mut self, key: &'static str) -> Option<i64> {
        match self.get(key)? {
            Value::Integer(v) => Some(*v),
            other => {
                self.fail(key, format!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn count(&mut self, key: &'static str, min: usize) -> Option<usize> {
        let v = self.int(key)?;
        if v < min as i64 {
            self.fail(key, format!("must be at least {min}, got {v}"));
            return None;
        }
        Some(v as usize)
    }

    fn seed(&mut self, key: &'static str, default: u64) -> u64 {
        match self.int(key) {
            Some(v) if v >= 0 => v as u64,
            Some(v) => {
                self.fail(key, format!("must be nonnegative, got {v}"));
                default
            }
            None => default,
        }
    }

    fn float(&mut self, key: &'static str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.fail(key, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    /// A number satisfying `ok`, or `default` when absent.
    fn number(&mut self, key: &'static str, default: f64, ok: fn(f64) -> bool, what: &str) -> Option<f64> {
        let present = self.table.contains_key(key);
        match self.float(key) {
            Some(v) if v.is_finite() && ok(v) => Some(v),
            Some(v) => {
                self.fail(key, format!("must be {what}, got {v}"));
                None
            }
            None if present => None,
            None => Some(default),
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.get(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.fail(key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn choice(&mut self, key: &'static str, default: &'static str, options: &[&'static str]) -> Option<&'a str> {
        let present = self.table.contains_key(key);
        match self.string(key) {
            Some(s) if options.contains(&s) => Some(s),
            Some(s) => {
                self.fail(key, format!("expected one of {options:?}, got {s:?}"));
                None
            }
            None if present => None,
            None => Some(default),
        }
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                let t = other.type_str();
                self.fail(key, format!("expected a boolean, got {t}"));
                default
            }
        }
    }

    fn path(&mut self, key: &'static str, base: &Path) -> Option<PathBuf> {
        self.string(key).map(|s| base.join(s))
    }

    fn forbid(&mut self, key: &'static str, reason: &str) {
        if self.table.contains_key(key) {
            self.used.push(key);
            self.fail(key, format!("not allowed {reason}"));
        }
    }

    /// Reports unknown keys and whether this section was violation-free.
    fn finish(&mut self) -> bool {
        let unknown: Vec<String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(&k.as_str()))
            .cloned()
            .collect();
        for k in unknown {
            self.fail(&k, "unknown key");
        }
        self.errors.len() == self.start
    }
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn nonnegative(v: f64) -> bool {
    v >= 0.0
}

fn parse_problem(f: &mut Fields<'_>, base: &Path) -> Option<ProblemConfig> {
    let n = f.count("n", 1);
    let m = f.count("m", 1);
    let d = f.count("d", 1).or_else(|| (!f.table.contains_key("d")).then_some(1));
    let p = f.count("p", 1).or_else(|| (!f.table.contains_key("p")).then_some(1));
    let mu = f.number("mu", 0.1, nonnegative, "finite and nonnegative");
    let reg = match f.choice("reg", "l1", &["l1", "l21"]) {
        Some("l21") => Some(SparseReg::L21),
        Some(_) => Some(SparseReg::L1),
        None => None,
    };
    let data = match f.choice("data", "generate", &["generate", "csv"]) {
        Some("csv") => {
            f.forbid("seed", "with data = \"csv\"");
            let header = f.boolean("header", false);
            match f.path("path", base) {
                Some(path) => Some(DataSource::Csv { path, header }),
                None => {
                    if !f.table.contains_key("path") {
                        f.fail("path", "required with data = \"csv\"");
                    }
                    None
                }
            }
        }
        Some(_) => {
            f.forbid("path", "with data = \"generate\"");
            f.forbid("header", "with data = \"generate\"");
            for (key, value) in [("n", n), ("m", m)] {
                if value.is_none() && !f.table.contains_key(key) {
                    f.fail(key, "required with data = \"generate\"");
                }
            }
            Some(DataSource::Generate { seed: f.seed("seed", 0) })
        }
        None => None,
    };
    if let (Some(n), Some(p)) = (n, p) {
        if p > n {
            f.fail("p", format!("must not exceed n = {n}, got {p}"));
        }
    }
    if let (Some(m), Some(d)) = (m, d) {
        if m < d {
            f.fail("m", format!("must be at least d = {d} so every agent has data, got {m}"));
        }
    }
    let ok = f.finish();
    ok.then_some(ProblemConfig { n, m, d: d?, p: p?, mu: mu?, reg: reg?, data: data? })
}

fn parse_graph(f: &mut Fields<'_>, base: &Path, problem: Option<&ProblemConfig>) -> Option<GraphConfig> {
    let kind = f.choice("kind", "er", &["er", "ring", "complete", "star", "file"]);
    let kind = match kind {
        Some("er") => {
            let prob = f.number("prob", 0.5, |v| v > 0.0 && v <= 1.0, "in (0, 1]");
            let seed = f.seed("seed", 0);
            prob.map(|prob| GraphKind::ErdosRenyi { prob, seed })
        }
        Some("file") => {
            let path = f.path("path", base);
            if path.is_none() && !f.table.contains_key("path") {
                f.fail("path", "required with kind = \"file\"");
            }
            path.map(GraphKind::File)
        }
        Some(other) => {
            if let Some(p) = problem {
                if matches!(other, "ring" | "star") && p.d < 2 {
                    f.fail("kind", format!("{other} needs problem.d >= 2, got {}", p.d));
                }
            }
            Some(match other {
                "ring" => GraphKind::Ring,
                "star" => GraphKind::Star,
                _ => GraphKind::Complete,
            })
        }
        None => None,
    };
    if !matches!(kind, Some(GraphKind::ErdosRenyi { .. }) | None) {
        f.forbid("prob", "unless kind = \"er\"");
        f.forbid("seed", "unless kind = \"er\"");
    }
    if !matches!(kind, Some(GraphKind::File(_)) | None) {
        f.forbid("path", "unless kind = \"file\"");
    }
    let export = f.path("export", base);
    let ok = f.finish();
    ok.then_some(GraphConfig { kind: kind?, export })
}

fn parse_solver(f: &mut Fields<'_>) -> Option<SolverConfig> {
    let defaults = SolverConfig::default();
    let max_iters = match f.int("max_iters") {
        Some(v) if v >= 0 => Some(v as usize),
        Some(v) => {
            f.fail("max_iters", format!("must be nonnegative, got {v}"));
            None
        }
        None if f.table.contains_key("max_iters") => None,
        None => Some(defaults.max_iters),
    };
    let beta = f.number("beta", defaults.beta, positive, "positive");
    let stop_tol = f.number("stop_tol", defaults.stop_tol, nonnegative, "nonnegative");

    let step_size = match f.choice("step", "bb", &["bb", "fixed"]) {
        Some("fixed") => {
            for key in ["eta_init", "eta_min", "eta_max"] {
                f.forbid(key, "with step = \"fixed\"");
            }
            match f.number("eta", f64::NAN, positive, "positive") {
                Some(eta) if eta.is_nan() => {
                    f.fail("eta", "required with step = \"fixed\"");
                    None
                }
                Some(eta) => Some(StepSize::Fixed(eta)),
                None => None,
            }
        }
        Some(_) => {
            f.forbid("eta", "with step = \"bb\"");
            let d = BbBounds::default();
            let initial = f.number("eta_init", d.initial, positive, "positive");
            let min = f.number("eta_min", d.min, positive, "positive");
            let max = f.number("eta_max", d.max, positive, "positive");
            match (initial, min, max) {
                (Some(initial), Some(min), Some(max)) if min <= max => {
                    Some(StepSize::Bb(BbBounds { initial, min, max }))
                }
                (Some(_), Some(min), Some(max)) => {
                    f.fail("eta_min", format!("must not exceed eta_max = {max}, got {min}"));
                    None
                }
                _ => None,
            }
        }
        None => None,
    };

    let sigma = match f.choice("sigma_schedule", "fixed", &["fixed", "power"]) {
        Some("power") => {
            f.forbid("sigma", "with sigma_schedule = \"power\"");
            let sigma0 = f.number("sigma0", 1.0, positive, "positive");
            let exponent = f.number("sigma_exponent", 1.0 / 3.0, nonnegative, "nonnegative");
            match (sigma0, exponent) {
                (Some(s), Some(e)) => SigmaSchedule::power(s, e).ok(),
                _ => None,
            }
        }
        Some(_) => {
            f.forbid("sigma0", "with sigma_schedule = \"fixed\"");
            f.forbid("sigma_exponent", "with sigma_schedule = \"fixed\"");
            f.number("sigma", 1.0, positive, "positive")
                .and_then(|s| SigmaSchedule::fixed(s).ok())
        }
        None => None,
    };
    let ok = f.finish();
    ok.then_some(SolverConfig {
        step_size: step_size?,
        beta: beta?,
        sigma: sigma?,
        max_iters: max_iters?,
        stop_tol: stop_tol?,
    })
}

fn parse_init(f: &mut Fields<'_>) -> Option<InitConfig> {
    let init = match f.choice("kind", "svd", &["svd", "random"]) {
        Some("random") => Some(InitConfig::Random { seed: f.seed("seed", 0) }),
        Some(_) => {
            f.forbid("seed", "with kind = \"svd\"");
            Some(InitConfig::Svd)
        }
        None => None,
    };
    let ok = f.finish();
    init.filter(|_| ok)
}

fn parse_reference(f: &mut Fields<'_>) -> Option<ReferenceConfig> {
    let d = ReferenceOptions::default();
    let enabled = f.boolean("enabled", true);
    let sigma_final = f.number("sigma_final", d.sigma_final, positive, "positive");
    let tol = f.number("tol", d.tol, positive, "positive");
    let max_iters = f.count("max_iters", 1).or_else(|| (!f.table.contains_key("max_iters")).then_some(d.max_iters));
    let stage_len = f.count("stage_len", 1).or_else(|| (!f.table.contains_key("stage_len")).then_some(d.stage_len));
    let ok = f.finish();
    ok.then_some(ReferenceConfig {
        enabled,
        options: ReferenceOptions {
            sigma_final: sigma_final?,
            tol: tol?,
            max_iters: max_iters?,
            stage_len: stage_len?,
            ..d
        },
    })
}

fn parse_output(f: &mut Fields<'_>, base: &Path) -> Option<OutputConfig> {
    let present = f.table.contains_key("metrics");
    let metrics = match f.path("metrics", base) {
        Some(p) => Some(p),
        None if present => None,
        None => Some(base.join("metrics.csv")),
    };
    let reference = f.path("reference", base);
    let align_columns = f.boolean("align_columns", false);
    let ok = f.finish();
    ok.then_some(OutputConfig { metrics: metrics?, reference, align_columns })
}
