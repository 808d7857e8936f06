//! Communication graphs and doubly-stochastic mixing matrices.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::Matrix;

/// Resampling budget for Erdős–Rényi graphs.
pub const ER_MAX_ATTEMPTS: usize = 1000;

/// A connected undirected simple graph on agents `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    d: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Rejects self-loops, duplicates,
    /// out-of-range endpoints and disconnected edge sets.
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let g = Self::build(d, edges)?;
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    fn build(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("a graph needs at least one agent".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::Config(format!("self-loop at agent {i}")));
            }
            if i >= d || j >= d {
                return Err(Error::Config(format!("edge ({i}, {j}) out of range for d = {d}")));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::Config(format!("duplicate edge ({i}, {j})")));
            }
        }
        let mut adjacency = vec![Vec::new(); d];
        for &(i, j) in &set {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            d,
            edges: set,
            adjacency,
        })
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.d];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Writes `# agents d` followed by one `i j` line per edge.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("# agents {}\n", self.d);
        for (i, j) in self.edges() {
            out.push_str(&format!("{i} {j}\n"));
        }
        fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads an edge list. The agent count comes from a `# agents d` line when
    /// present and from the largest endpoint otherwise.
    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut d = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(count) = comment.trim().strip_prefix("agents") {
                    d = Some(parse_index(path, idx + 1, 1, count.trim())?);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Ingestion {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    column: 1,
                    message: format!("expected two indices, found {}", fields.len()),
                });
            }
            let i = parse_index(path, idx + 1, 1, fields[0])?;
            let j = parse_index(path, idx + 1, 2, fields[1])?;
            edges.push((i, j));
        }
        let d = d.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(1));
        Graph::new(d, edges)
    }
}

fn parse_index(path: &Path, line: usize, column: usize, field: &str) -> Result<usize> {
    field.parse().map_err(|_| Error::Ingestion {
        path: path.to_path_buf(),
        line,
        column,
        message: format!("not a node index: {field:?}"),
    })
}

/// `G(d, prob)`: every pair is an edge independently with probability `prob`.
/// Disconnected samples are redrawn with seeds `seed + 1, seed + 2, …`.
pub fn erdos_renyi(d: usize, prob: f64, seed: u64) -> Result<Graph> {
    if d == 0 {
        return Err(Error::Config("a graph needs at least one agent".into()));
    }
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(Error::Config(format!("edge probability must lie in (0, 1], got {prob}")));
    }
    for attempt in 0..ER_MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut edges = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if rng.random::<f64>() < prob {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::build(d, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Connectivity {
        d,
        prob,
        attempts: ER_MAX_ATTEMPTS,
    })
}

/// Cycle `0 - 1 - … - (d−1) - 0`.
pub fn ring(d: usize) -> Result<Graph> {
    if d < 2 {
        return Err(Error::Config(format!("a ring needs d >= 2, got {d}")));
    }
    if d == 2 {
        return Graph::new(2, [(0, 1)]);
    }
    Graph::new(d, (0..d).map(|i| (i, (i + 1) % d)))
}

pub fn complete(d: usize) -> Result<Graph> {
    Graph::new(d, (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))))
}

/// Hub at agent 0.
pub fn star(d: usize) -> Result<Graph> {
    if d < 2 {
        return Err(Error::Config(format!("a star needs d >= 2, got {d}")));
    }
    Graph::new(d, (1..d).map(|j| (0, j)))
}

/// Symmetric doubly-stochastic `W` conforming to a graph, with
/// `λ = ‖W − 11ᵀ/d‖₂`.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: Matrix,
    lambda: f64,
    // (j, W(i,j)) for every j with W(i,j) != 0, including i itself.
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    /// Validates a dense matrix: symmetric, nonnegative, rows summing to one,
    /// and `λ < 1`.
    pub fn from_dense(w: Matrix) -> Result<Self> {
        let d = w.nrows();
        if !w.is_square() || d == 0 {
            return Err(Error::Dimension(format!(
                "mixing matrix must be square and nonempty, got {:?}",
                w.shape()
            )));
        }
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                let v = w[(i, j)];
                if !(v >= 0.0) {
                    return Err(Error::Parameter(format!("W({i},{j}) = {v} is negative")));
                }
                if (v - w[(j, i)]).abs() > 1e-14 {
                    return Err(Error::Parameter(format!("W is not symmetric at ({i},{j})")));
                }
                row += v;
            }
            if (row - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("row {i} of W sums to {row}")));
            }
        }
        let lambda = spectral_gap_norm(&w);
        if !(lambda < 1.0 - 1e-12) {
            return Err(Error::Disconnected);
        }
        let neighbors = (0..d)
            .map(|i| {
                (0..d)
                    .filter(|&j| w[(i, j)] != 0.0)
                    .map(|j| (j, w[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self {
            w,
            lambda,
            neighbors,
        })
    }

    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    pub fn dense(&self) -> &Matrix {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// One round of neighbor exchange: `out[i] = Σ_j W(i,j) payloads[j]`.
    ///
    /// Agent `i` only reads payloads from agents with `W(i,j) ≠ 0`. Each output
    /// entry sums its terms in ascending order of value, so the result is
    /// bitwise independent of agent labels and thread count.
    pub fn mix(&self, payloads: &[Matrix]) -> Result<Vec<Matrix>> {
        if payloads.len() != self.d() {
            return Err(Error::Dimension(format!(
                "expected {} payloads, got {}",
                self.d(),
                payloads.len()
            )));
        }
        let shape = payloads[0].shape();
        if let Some(bad) = payloads.iter().position(|p| p.shape() != shape) {
            return Err(Error::Dimension(format!(
                "payload {bad} has shape {:?}, expected {shape:?}",
                payloads[bad].shape()
            )));
        }
        Ok((0..self.d())
            .into_par_iter()
            .map(|i| self.mix_row_by(i, |j| &payloads[j]))
            .collect())
    }

    /// Row `i` of the mix, fetching neighbor payloads through `get`.
    pub(crate) fn mix_row_by<'a>(&self, i: usize, get: impl Fn(usize) -> &'a Matrix) -> Matrix {
        let row = &self.neighbors[i];
        let (r, c) = get(row[0].0).shape();
        let mut out = Matrix::zeros(r, c);
        let mut terms = Vec::with_capacity(row.len());
        for (e, slot) in out.as_mut_slice().iter_mut().enumerate() {
            terms.clear();
            terms.extend(row.iter().map(|&(j, w)| w * get(j).as_slice()[e]));
            terms.sort_unstable_by(f64::total_cmp);
            *slot = terms.iter().sum();
        }
        out
    }
}

/// Metropolis weights `W(i,j) = 1/(1 + max(deg i, deg j))` on edges, with the
/// diagonal absorbing the remainder of each row.
pub fn metropolis_weights(g: &Graph) -> Result<MixingMatrix> {
    let d = g.d();
    let mut w = Matrix::zeros(d, d);
    for (i, j) in g.edges() {
        let v = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..d {
        let off: f64 = g.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_dense(w)
}

/// Largest absolute eigenvalue of `W − 11ᵀ/d`.
fn spectral_gap_norm(w: &Matrix) -> f64 {
    let d = w.nrows();
    let centered = w.map(|v| v - 1.0 / d as f64);
    centered
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}
