//! Communication graphs, Laplacian spectra and block arc matrices.
//!
//! Every undirected edge `{i, j}` (stored with `i < j`) is split into two
//! directed arcs, `i -> j` followed by `j -> i`. Arcs are ordered by their
//! edge, and edges lexicographically, so all matrices built here are
//! reproducible. The consensus constraint is the stacked pair
//! `A_s x = z`, `A_d x = z`, i.e. `A = [A_s; A_d]` and `B = [-I; -I]`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_sorted;

/// Rejection cap used by [`generate_random_graph`].
pub const DEFAULT_MAX_REJECTIONS: usize = 10_000;

// Keeps graph draws off the streams used by parameter tracks.
const GRAPH_SEED_SALT: u64 = 0x6a09_e667_f3bc_c908;

/// Undirected, connected, simple graph on nodes `0..n_nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<bool>,
}

impl Graph {
    /// Builds a graph from undirected edges. Edges may be given in any order
    /// and orientation; they are normalised to `(min, max)` and sorted.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::build(n_nodes, edges)?;
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    fn build(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::InvalidArgument(format!(
                "a graph needs at least 2 nodes, got {n_nodes}"
            )));
        }
        let mut adjacency = vec![false; n_nodes * n_nodes];
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::NodeOutOfRange {
                    index: a.max(b),
                    n_nodes,
                });
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            let (i, j) = (a.min(b), a.max(b));
            if adjacency[i * n_nodes + j] {
                return Err(Error::InvalidArgument(format!("duplicate edge {{{i}, {j}}}")));
            }
            adjacency[i * n_nodes + j] = true;
            adjacency[j * n_nodes + i] = true;
            norm.push((i, j));
        }
        norm.sort_unstable();
        Ok(Self {
            n_nodes,
            edges: norm,
            adjacency,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Undirected edges as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n_nodes && j < self.n_nodes && self.adjacency[i * self.n_nodes + j]
    }

    /// Sorted neighbour list of node `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n_nodes).filter(|&j| self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n_nodes).filter(|&j| self.has_edge(i, j)).count()
    }

    /// Depth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..self.n_nodes {
                if self.adjacency[i * self.n_nodes + j] && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n_nodes
    }

    /// Combinatorial Laplacian `D - W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n_nodes;
        let mut l = DMatrix::zeros(n, n);
        for &(i, j) in &self.edges {
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_nodes {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let edges: Vec<_> = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Self::from_edges(self.n_nodes, &edges)
    }

    /// Edge-list text: `"n m"` on the first line, then one `"i j"` line per
    /// undirected edge, 0-indexed.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n_nodes, self.edges.len());
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format {
            what: "edge list",
            msg,
        };
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let parse_pair = |line: &str| -> Result<(usize, usize)> {
            let mut it = line.split_whitespace();
            let a = it.next().and_then(|t| t.parse().ok());
            let b = it.next().and_then(|t| t.parse().ok());
            match (a, b, it.next()) {
                (Some(a), Some(b), None) => Ok((a, b)),
                _ => Err(bad(format!("expected two integers, got `{line}`"))),
            }
        };
        let (n, m) = parse_pair(header)?;
        let edges = lines.map(parse_pair).collect::<Result<Vec<_>>>()?;
        if edges.len() != m {
            return Err(bad(format!("header announces {m} edges, found {}", edges.len())));
        }
        Self::from_edges(n, &edges)
    }
}

/// Erdős–Rényi draw conditioned on connectivity by rejection.
pub fn generate_random_graph(n_nodes: usize, edge_prob: f64, seed: u64) -> Result<Graph> {
    generate_random_graph_capped(n_nodes, edge_prob, seed, DEFAULT_MAX_REJECTIONS)
}

/// As [`generate_random_graph`] with an explicit rejection cap. Attempt `a`
/// draws from sub-stream `a` of the seed, so the result is deterministic.
pub fn generate_random_graph_capped(
    n_nodes: usize,
    edge_prob: f64,
    seed: u64,
    max_rejections: usize,
) -> Result<Graph> {
    if n_nodes < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_nodes must be at least 2, got {n_nodes}"
        )));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "edge_prob must lie in (0, 1], got {edge_prob}"
        )));
    }
    for attempt in 0..=max_rejections {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ GRAPH_SEED_SALT);
        rng.set_stream(attempt as u64);
        let mut edges = Vec::new();
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                if rng.random::<f64>() < edge_prob {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::build(n_nodes, &edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::ConnectivityUnreachable {
        n_nodes,
        edge_prob,
        attempts: max_rejections + 1,
    })
}

/// Which Laplacian eigenvalue plays the role of `gamma_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaConvention {
    /// Second largest eigenvalue, ties counted with multiplicity. With a
    /// single nonzero eigenvalue (n = 2) that eigenvalue is used.
    #[default]
    SecondLargest,
    /// Algebraic connectivity: the smallest nonzero eigenvalue.
    SmallestNonzero,
}

impl GammaConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaConvention::SecondLargest => "second_largest",
            GammaConvention::SmallestNonzero => "smallest_nonzero",
        }
    }
}

impl std::str::FromStr for GammaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "second_largest" => Ok(Self::SecondLargest),
            "smallest_nonzero" => Ok(Self::SmallestNonzero),
            other => Err(Error::InvalidArgument(format!(
                "unknown gamma_L convention `{other}` (expected second_largest or smallest_nonzero)"
            ))),
        }
    }
}

impl std::fmt::Display for GammaConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpectrum {
    /// All Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Matching orthonormal eigenvectors (columns).
    pub eigenvectors: DMatrix<f64>,
    pub gamma_l: f64,
    pub big_gamma_l: f64,
    pub convention: GammaConvention,
}

impl GraphSpectrum {
    /// Smallest nonzero eigenvalue regardless of the configured convention.
    pub fn algebraic_connectivity(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// Moore–Penrose pseudo-inverse of the Laplacian, built from the spectrum
    /// (the single zero mode is dropped).
    pub fn laplacian_pinv(&self) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        let mut out = DMatrix::zeros(n, n);
        for j in 1..n {
            let v = self.eigenvectors.column(j);
            out += (v * v.transpose()) / self.eigenvalues[j];
        }
        out
    }
}

pub fn laplacian_spectrum(g: &Graph, convention: GammaConvention) -> Result<GraphSpectrum> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let (eigenvalues, eigenvectors) = sym_eigen_sorted(&g.laplacian());
    let n = eigenvalues.len();
    let gamma_l = match convention {
        GammaConvention::SecondLargest => eigenvalues[(n - 2).max(1)],
        GammaConvention::SmallestNonzero => eigenvalues[1],
    };
    let big_gamma_l = eigenvalues[n - 1];
    Ok(GraphSpectrum {
        eigenvalues,
        eigenvectors,
        gamma_l,
        big_gamma_l,
        convention,
    })
}

/// One directed arc of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub src: usize,
    pub dst: usize,
    /// Index of the undirected edge this arc belongs to.
    pub edge: usize,
}

/// Block arc matrices of the consensus constraint, together with the arc
/// list and per-node incidence used by the agents.
#[derive(Debug, Clone)]
pub struct ArcMatrices {
    n_nodes: usize,
    p: usize,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    a_s: DMatrix<f64>,
    a_d: DMatrix<f64>,
}

pub fn arc_matrices(g: &Graph, p: usize) -> Result<ArcMatrices> {
    if p == 0 {
        return Err(Error::InvalidArgument("variable dimension p must be at least 1".into()));
    }
    let n = g.n_nodes();
    let mut arcs = Vec::with_capacity(2 * g.n_edges());
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        arcs.push(Arc { src: i, dst: j, edge: e });
        arcs.push(Arc { src: j, dst: i, edge: e });
    }
    let m = arcs.len();
    let mut out_arcs = vec![Vec::new(); n];
    let mut in_arcs = vec![Vec::new(); n];
    let mut a_s = DMatrix::zeros(m * p, n * p);
    let mut a_d = DMatrix::zeros(m * p, n * p);
    for (a, arc) in arcs.iter().enumerate() {
        out_arcs[arc.src].push(a);
        in_arcs[arc.dst].push(a);
        for r in 0..p {
            a_s[(a * p + r, arc.src * p + r)] = 1.0;
            a_d[(a * p + r, arc.dst * p + r)] = 1.0;
        }
    }
    let neighbors = (0..n).map(|i| g.neighbors(i)).collect();
    Ok(ArcMatrices {
        n_nodes: n,
        p,
        arcs,
        out_arcs,
        in_arcs,
        neighbors,
        a_s,
        a_d,
    })
}

impl ArcMatrices {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of directed arcs (twice the undirected edge count).
    pub fn m_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Arcs leaving node `i`, in arc order.
    pub fn out_arcs(&self, i: usize) -> &[usize] {
        &self.out_arcs[i]
    }

    /// Arcs entering node `i`, in arc order.
    pub fn in_arcs(&self, i: usize) -> &[usize] {
        &self.in_arcs[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.out_arcs[i].len()
    }

    pub fn a_s(&self) -> &DMatrix<f64> {
        &self.a_s
    }

    pub fn a_d(&self) -> &DMatrix<f64> {
        &self.a_d
    }

    /// Stacked constraint matrix `[A_s; A_d]`.
    pub fn a_stacked(&self) -> DMatrix<f64> {
        let (r, c) = self.a_s.shape();
        let mut a = DMatrix::zeros(2 * r, c);
        a.rows_mut(0, r).copy_from(&self.a_s);
        a.rows_mut(r, r).copy_from(&self.a_d);
        a
    }

    /// `[-I; -I]`, shape `(2 m p) x (m p)`.
    pub fn b(&self) -> DMatrix<f64> {
        let mp = self.m_arcs() * self.p;
        let mut b = DMatrix::zeros(2 * mp, mp);
        for r in 0..mp {
            b[(r, r)] = -1.0;
            b[(mp + r, r)] = -1.0;
        }
        b
    }

    /// Oriented incidence `E_o = A_s - A_d`.
    pub fn e_o(&self) -> DMatrix<f64> {
        &self.a_s - &self.a_d
    }
}
