//! Objectives of the form `Σ_i f_i(X) + g_i(X)` split across agents, and the
//! sparse-PCA instance built from a column-partitioned data matrix.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::{gaussian_matrix, Matrix};
use crate::matrix_io::read_matrix_csv;
use crate::smoothing::{Regularizer, RegularizerKind};

/// The smooth part `f_i` owned by one agent.
pub trait SmoothLoss: Send + Sync {
    fn value(&self, x: &Matrix) -> f64;
    fn grad(&self, x: &Matrix) -> Matrix;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    /// Exact `sup { ‖∇f(X)‖_F : ‖X‖_F ≤ radius }` when it is known in closed form.
    fn grad_norm_sup(&self, _radius: f64) -> Option<f64> {
        None
    }
}

/// `f(X) = −½ tr(Xᵀ C X)` for a symmetric positive semidefinite `C`.
#[derive(Debug, Clone)]
pub struct NegativeQuadratic {
    gram: Matrix,
    lipschitz: f64,
}

impl NegativeQuadratic {
    pub fn new(gram: Matrix) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::Dimension(format!(
                "Gram matrix must be square, got {:?}",
                gram.shape()
            )));
        }
        let lipschitz = largest_eigenvalue(&gram, 1e-10, 10_000);
        Ok(Self { gram, lipschitz })
    }

    /// `C = A Aᵀ`.
    pub fn from_data(a: &Matrix) -> Result<Self> {
        Self::new(a * a.transpose())
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }
}

impl SmoothLoss for NegativeQuadratic {
    fn value(&self, x: &Matrix) -> f64 {
        -0.5 * x.dot(&(&self.gram * x))
    }

    fn grad(&self, x: &Matrix) -> Matrix {
        -(&self.gram * x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn grad_norm_sup(&self, radius: f64) -> Option<f64> {
        Some(self.lipschitz * radius)
    }
}

type ValueFn = dyn Fn(&Matrix) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Matrix) -> Matrix + Send + Sync;

/// A smooth loss assembled from closures.
pub struct FnLoss {
    value: Box<ValueFn>,
    grad: Box<GradFn>,
    lipschitz: f64,
}

impl FnLoss {
    pub fn new(
        value: impl Fn(&Matrix) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Matrix) -> Matrix + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Self {
        Self {
            value: Box::new(value),
            grad: Box::new(grad),
            lipschitz,
        }
    }
}

impl SmoothLoss for FnLoss {
    fn value(&self, x: &Matrix) -> f64 {
        (self.value)(x)
    }

    fn grad(&self, x: &Matrix) -> Matrix {
        (self.grad)(x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Sum of several losses; used to collapse a network onto a single agent.
struct SumLoss(Vec<Arc<dyn SmoothLoss>>);

impl SmoothLoss for SumLoss {
    fn value(&self, x: &Matrix) -> f64 {
        self.0.iter().map(|f| f.value(x)).sum()
    }

    fn grad(&self, x: &Matrix) -> Matrix {
        let mut g = self.0[0].grad(x);
        for f in &self.0[1..] {
            g += f.grad(x);
        }
        g
    }

    fn lipschitz(&self) -> f64 {
        self.0.iter().map(|f| f.lipschitz()).sum()
    }

    fn grad_norm_sup(&self, radius: f64) -> Option<f64> {
        // Upper bound, exact when the summands share a maximizer.
        self.0.iter().map(|f| f.grad_norm_sup(radius)).sum()
    }
}

/// One agent's private pair `(f_i, g_i)`.
#[derive(Clone)]
pub struct Agent {
    pub loss: Arc<dyn SmoothLoss>,
    pub reg: Regularizer,
}

impl Agent {
    pub fn new(loss: Arc<dyn SmoothLoss>, reg: Regularizer) -> Self {
        Self { loss, reg }
    }
}

/// `min Σ_i f_i(X) + g_i(X)` over `n x p` orthonormal matrices.
#[derive(Clone)]
pub struct DecentralizedProblem {
    agents: Vec<Agent>,
    n: usize,
    p: usize,
    lf: f64,
    lg: f64,
}

impl DecentralizedProblem {
    pub fn new(n: usize, p: usize, agents: Vec<Agent>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Config("a problem needs at least one agent".into()));
        }
        if p == 0 || p > n {
            return Err(Error::Dimension(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        let lf = agents.iter().map(|a| a.loss.lipschitz()).fold(0.0, f64::max);
        let lg = agents.iter().map(|a| a.reg.lipschitz()).fold(0.0, f64::max);
        Ok(Self { agents, n, p, lf, lg })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    pub fn d(&self) -> usize {
        self.agents.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `max_i L_{f_i}`.
    pub fn lf(&self) -> f64 {
        self.lf
    }

    /// `max_i L_{g_i}`.
    pub fn lg(&self) -> f64 {
        self.lg
    }

    pub fn check_shape(&self, x: &Matrix) -> Result<()> {
        if x.shape() != (self.n, self.p) {
            return Err(Error::Dimension(format!(
                "expected a {}x{} matrix, got {:?}",
                self.n,
                self.p,
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn smooth_value(&self, x: &Matrix) -> f64 {
        self.agents.iter().map(|a| a.loss.value(x)).sum()
    }

    pub fn reg_value(&self, x: &Matrix) -> f64 {
        self.agents.iter().map(|a| a.reg.value(x)).sum()
    }

    /// Global objective `Σ_i f_i(X) + g_i(X)`.
    pub fn objective(&self, x: &Matrix) -> f64 {
        self.smooth_value(x) + self.reg_value(x)
    }

    /// Single-agent problem with `f = Σ f_i` and `g = Σ g_i`. The regularizers
    /// must all be L1 or all be L21 so that the sum keeps a closed-form prox.
    pub fn collapse(&self) -> Result<DecentralizedProblem> {
        let first = &self.agents[0].reg;
        let mut weight = 0.0;
        for a in &self.agents {
            let same = matches!(
                (first.kind(), a.reg.kind()),
                (RegularizerKind::L1, RegularizerKind::L1)
                    | (RegularizerKind::L21, RegularizerKind::L21)
            );
            if !same {
                return Err(Error::Config(
                    "cannot collapse agents with differing or custom regularizers".into(),
                ));
            }
            weight += a.reg.weight();
        }
        let reg = match first.kind() {
            RegularizerKind::L21 => Regularizer::l21(weight, self.n)?,
            _ => Regularizer::l1(weight, self.n, self.p)?,
        };
        let losses = self.agents.iter().map(|a| a.loss.clone()).collect();
        DecentralizedProblem::new(
            self.n,
            self.p,
            vec![Agent::new(Arc::new(SumLoss(losses)), reg)],
        )
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Stops once `‖Cv − λv‖ ≤ tol·λ`.
pub fn largest_eigenvalue(c: &Matrix, tol: f64, max_iters: usize) -> f64 {
    let n = c.nrows();
    if n == 0 {
        return 0.0;
    }
    // Distinct entries so the start is not orthogonal to structured eigenvectors.
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = c * &v;
        lambda = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let residual = (&w - &v * lambda).norm();
        v = w / norm;
        if residual <= tol * lambda.abs() {
            break;
        }
    }
    lambda
}

/// Which sparsity-promoting norm `r` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseReg {
    L1,
    L21,
}

/// Data for `min −½ Σ_i tr(Xᵀ A_i A_iᵀ X) + μ r(X)` where `A = [A_1 … A_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePcaData {
    a: Matrix,
    partitions: Vec<Range<usize>>,
    mu: f64,
}

impl SparsePcaData {
    /// Splits the columns of `a` into `d` contiguous blocks; the first
    /// `m mod d` blocks get one extra column.
    pub fn new(a: Matrix, d: usize, mu: f64) -> Result<Self> {
        let m = a.ncols();
        if d == 0 {
            return Err(Error::Config("agent count d must be at least 1".into()));
        }
        if m < d {
            return Err(Error::Config(format!(
                "need at least one sample per agent: m = {m} < d = {d}"
            )));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Config(format!(
                "mu must be finite and nonnegative, got {mu}"
            )));
        }
        let base = m / d;
        let extra = m % d;
        let mut partitions = Vec::with_capacity(d);
        let mut start = 0;
        for i in 0..d {
            let len = base + usize::from(i < extra);
            partitions.push(start..start + len);
            start += len;
        }
        Ok(Self { a, partitions, mu })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn partitions(&self) -> &[Range<usize>] {
        &self.partitions
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn d(&self) -> usize {
        self.partitions.len()
    }

    /// Agent `i`'s block `A_i`.
    pub fn local(&self, i: usize) -> Matrix {
        let r = &self.partitions[i];
        self.a.columns(r.start, r.len()).into_owned()
    }
}

/// Seeded i.i.d. standard Gaussian `n x m` data split across `d` agents.
pub fn generate_gaussian_data(
    n: usize,
    m: usize,
    d: usize,
    mu: f64,
    seed: u64,
) -> Result<SparsePcaData> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if m < d {
        return Err(Error::Config(format!(
            "need at least one sample per agent: m = {m} < d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SparsePcaData::new(gaussian_matrix(n, m, &mut rng), d, mu)
}

/// Reads `A` (features as rows, samples as columns) from a CSV file.
pub fn load_data_csv(
    path: impl AsRef<Path>,
    d: usize,
    mu: f64,
    has_header: bool,
) -> Result<SparsePcaData> {
    let path = path.as_ref();
    let a = read_matrix_csv(path, has_header)?;
    if a.ncols() < d {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("{} samples cannot be split across {d} agents", a.ncols()),
        });
    }
    SparsePcaData::new(a, d, mu)
}

/// Builds the decentralized sparse-PCA problem with
/// `f_i(X) = −½ tr(Xᵀ A_i A_iᵀ X)` and `g_i = (μ/d) r`.
pub fn sparse_pca_problem(
    data: &SparsePcaData,
    p: usize,
    reg: SparseReg,
) -> Result<DecentralizedProblem> {
    let n = data.n();
    if p == 0 || p > n {
        return Err(Error::Config(format!("need n >= p >= 1, got n = {n}, p = {p}")));
    }
    let d = data.d();
    let weight = data.mu() / d as f64;
    let mut agents = Vec::with_capacity(d);
    for (i, part) in data.partitions().iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("agent {i} has no samples")));
        }
        let loss = NegativeQuadratic::from_data(&data.local(i))?;
        let g = match reg {
            SparseReg::L1 => Regularizer::l1(weight, n, p)?,
            SparseReg::L21 => Regularizer::l21(weight, n)?,
        };
        agents.push(Agent::new(Arc::new(loss), g));
    }
    DecentralizedProblem::new(n, p, agents)
}
