//! Graphs, Ising models and random instance generation.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Rejection-sampling budget of [`generate_graph`].
pub const GENERATION_ATTEMPTS: usize = 10_000;

/// Standard deviation of sampled edge couplings.
pub const OMEGA_STD: f64 = 1.0;
/// Standard deviation of sampled node fields.
pub const FIELD_STD: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrfError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("expected {expected} {what}, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite {0} parameter at index {1}")]
    NonFinite(&'static str, usize),
    #[error("assignment entry {0} is {1}, expected -1 or +1")]
    InvalidState(usize, i8),
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("no graph with order {order} and average unique node degree in [{lo}, {hi}] found after {attempts} attempts")]
    GenerationExhausted {
        order: usize,
        lo: f64,
        hi: f64,
        attempts: usize,
    },
    #[error("model file: {0}")]
    Format(String),
}

/// Simple undirected graph over nodes `0..n`.
///
/// Edges are stored canonically as `(i, j)` with `i < j`, sorted
/// lexicographically; edge-indexed parameters follow that order.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    // (neighbor, edge index), ascending by neighbor
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges)
            .finish()
    }
}

impl Graph {
    /// Builds a graph, validating and canonicalizing the edge list.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, MrfError> {
        if n == 0 {
            return Err(MrfError::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(MrfError::NodeOutOfRange(a, b, n));
            }
            if a == b {
                return Err(MrfError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(MrfError::DuplicateEdge(e.0, e.1));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for (k, &(i, j)) in edges.iter().enumerate() {
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn empty(n: usize) -> Result<Self, MrfError> {
        Self::new(n, std::iter::empty())
    }

    pub fn path(n: usize) -> Result<Self, MrfError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn star(n: usize) -> Result<Self, MrfError> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn complete(n: usize) -> Result<Self, MrfError> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn cycle(n: usize) -> Result<Self, MrfError> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(j, _)| j)
    }

    /// `(neighbor, edge index)` pairs of `i`, ascending by neighbor.
    pub fn incident(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    pub fn is_connected(&self) -> bool {
        self.components() == 1
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// True when the graph has no cycles.
    pub fn is_forest(&self) -> bool {
        self.edges.len() + self.components() == self.n
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MrfError> {
        Self::new(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])))
    }
}

/// Mean of the set of distinct node degrees; each degree value counts once.
pub fn average_unique_node_degree(g: &Graph) -> f64 {
    let distinct: BTreeSet<usize> = g.degrees().into_iter().collect();
    distinct.iter().sum::<usize>() as f64 / distinct.len() as f64
}

/// Target properties for random graph generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub order: usize,
    /// Closed interval for the average unique node degree.
    pub aund_lo: f64,
    pub aund_hi: f64,
    pub require_connected: bool,
}

impl GraphSpec {
    pub fn new(order: usize, aund_lo: f64, aund_hi: f64, require_connected: bool) -> Result<Self, MrfError> {
        if order == 0 {
            return Err(MrfError::InvalidSpec("order must be positive".into()));
        }
        if !(aund_lo.is_finite() && aund_hi.is_finite()) || aund_lo < 0.0 || aund_lo > aund_hi {
            return Err(MrfError::InvalidSpec(format!(
                "degree range [{aund_lo}, {aund_hi}] is not a valid interval"
            )));
        }
        Ok(Self {
            order,
            aund_lo,
            aund_hi,
            require_connected,
        })
    }

    pub fn connected(order: usize, aund_lo: f64, aund_hi: f64) -> Result<Self, MrfError> {
        Self::new(order, aund_lo, aund_hi, true)
    }

    /// A graph whose average unique degree is `k` needs at least `k + 1` nodes.
    pub fn is_feasible(&self) -> bool {
        self.order > self.aund_lo.floor() as usize
    }
}

/// Samples a random graph matching `spec`.
///
/// Each attempt draws a target edge count uniformly from the counts whose
/// mean degree lies in the requested range, then (for connected specs)
/// starts from a uniform random spanning tree (Prüfer decoding) and adds
/// uniformly random non-edges until the count is reached. Attempts whose
/// average unique node degree misses the range are rejected.
pub fn generate_graph(spec: &GraphSpec, seed: u64) -> Result<Graph, MrfError> {
    let exhausted = |attempts| MrfError::GenerationExhausted {
        order: spec.order,
        lo: spec.aund_lo,
        hi: spec.aund_hi,
        attempts,
    };
    if !spec.is_feasible() {
        return Err(exhausted(0));
    }
    let n = spec.order;
    let max_edges = n * (n - 1) / 2;
    let base = if spec.require_connected { n - 1 } else { 0 };
    let lo = ((n as f64 * spec.aund_lo / 2.0).ceil() as usize).max(base);
    let hi = ((n as f64 * spec.aund_hi / 2.0).floor() as usize).min(max_edges);
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (base, max_edges) };

    let mut rng = rng_from_seed(seed);
    for _ in 0..GENERATION_ATTEMPTS {
        let target = rng.random_range(lo..=hi);
        let mut edges: BTreeSet<(usize, usize)> = if spec.require_connected {
            random_tree(n, &mut rng).into_iter().collect()
        } else {
            BTreeSet::new()
        };
        if target > edges.len() {
            let mut candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|e| !edges.contains(e))
                .collect();
            let need = target - edges.len();
            let (picked, _) = candidates.partial_shuffle(&mut rng, need);
            edges.extend(picked.iter().copied());
        }
        let g = Graph::new(n, edges)?;
        let aund = average_unique_node_degree(&g);
        if aund >= spec.aund_lo && aund <= spec.aund_hi && (!spec.require_connected || g.is_connected()) {
            return Ok(g);
        }
    }
    Err(exhausted(GENERATION_ATTEMPTS))
}

/// Uniform random labeled tree on `n` nodes via Prüfer decoding.
fn random_tree(n: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => return Vec::new(),
        2 => return vec![(0, 1)],
        _ => {}
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = leaves.pop_first().expect("prufer decoding always has a leaf");
        edges.push((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let a = leaves.pop_first().expect("two leaves remain");
    let b = leaves.pop_first().expect("two leaves remain");
    edges.push((a, b));
    edges
}

/// Joint state of all nodes, each entry `-1` or `+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<i8>);

impl Assignment {
    pub fn new(values: Vec<i8>) -> Result<Self, MrfError> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(MrfError::InvalidState(i, v));
        }
        Ok(Self(values))
    }

    pub fn all_plus(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Bit `i` of `mask` set means node `i` is `+1`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self((0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i] as f64
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn set(&mut self, i: usize, plus: bool) {
        self.0[i] = if plus { 1 } else { -1 };
    }
}

/// Pairwise binary Markov network with couplings `omega` (one per edge, in
/// canonical edge order) and fields `b` (one per node).
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    graph: Graph,
    omega: Vec<f64>,
    b: Vec<f64>,
}

impl IsingModel {
    pub fn new(graph: Graph, omega: Vec<f64>, b: Vec<f64>) -> Result<Self, MrfError> {
        if omega.len() != graph.edge_count() {
            return Err(MrfError::LengthMismatch {
                what: "edge couplings",
                expected: graph.edge_count(),
                found: omega.len(),
            });
        }
        if b.len() != graph.order() {
            return Err(MrfError::LengthMismatch {
                what: "node fields",
                expected: graph.order(),
                found: b.len(),
            });
        }
        if let Some(k) = omega.iter().position(|w| !w.is_finite()) {
            return Err(MrfError::NonFinite("edge", k));
        }
        if let Some(k) = b.iter().position(|w| !w.is_finite()) {
            return Err(MrfError::NonFinite("node", k));
        }
        Ok(Self { graph, omega, b })
    }

    /// Builds a model from `(i, j, ω_ij)` triples in any order.
    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)], b: Vec<f64>) -> Result<Self, MrfError> {
        let graph = Graph::new(n, edges.iter().map(|&(i, j, _)| (i, j)))?;
        let mut omega = vec![0.0; graph.edge_count()];
        for &(i, j, w) in edges {
            omega[graph.edge_index(i, j).expect("edge just inserted")] = w;
        }
        Self::new(graph, omega, b)
    }

    /// Folds observed data into node fields, `b_i = k_i d_i`.
    pub fn with_evidence(graph: Graph, omega: Vec<f64>, k: &[f64], d: &[f64]) -> Result<Self, MrfError> {
        if k.len() != d.len() {
            return Err(MrfError::LengthMismatch {
                what: "data values",
                expected: k.len(),
                found: d.len(),
            });
        }
        let b = k.iter().zip(d).map(|(k, d)| k * d).collect();
        Self::new(graph, omega, b)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn order(&self) -> usize {
        self.graph.order()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Relabels node `v` as `perm[v]`, carrying parameters along.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MrfError> {
        let edges: Vec<_> = self
            .graph
            .edges()
            .iter()
            .zip(&self.omega)
            .map(|(&(i, j), &w)| (perm[i], perm[j], w))
            .collect();
        let mut b = vec![0.0; self.order()];
        for (v, &bv) in self.b.iter().enumerate() {
            b[perm[v]] = bv;
        }
        Self::from_weighted_edges(self.order(), &edges, b)
    }
}

/// Draws `ω_ij ~ N(0, 1)` per edge (canonical order) and `b_i ~ N(0, 0.25²)`
/// per node from independent sub-streams of `seed`.
pub fn sample_model(g: &Graph, seed: u64) -> IsingModel {
    let omega_dist = Normal::new(0.0, OMEGA_STD).expect("valid std");
    let field_dist = Normal::new(0.0, FIELD_STD).expect("valid std");
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let omega = (0..g.edge_count()).map(|_| omega_dist.sample(&mut rng)).collect();
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let b = (0..g.order()).map(|_| field_dist.sample(&mut rng)).collect();
    IsingModel::new(g.clone(), omega, b).expect("sampled parameters are finite")
}

/// `Σ ω_ij θ_i θ_j + Σ b_i θ_i`, so that `p(θ) ∝ exp(-energy)`.
pub fn energy(m: &IsingModel, a: &Assignment) -> f64 {
    assert_eq!(a.len(), m.order(), "assignment length must match model order");
    let pair: f64 = m
        .graph
        .edges()
        .iter()
        .zip(&m.omega)
        .map(|(&(i, j), w)| w * a.get(i) * a.get(j))
        .sum();
    let field: f64 = m.b.iter().enumerate().map(|(i, b)| b * a.get(i)).sum();
    pair + field
}

/// Copy of `m` with every coupling set to zero.
pub fn zero_edges(m: &IsingModel) -> IsingModel {
    IsingModel {
        graph: m.graph.clone(),
        omega: vec![0.0; m.omega.len()],
        b: m.b.clone(),
    }
}

/// On-disk model document. `omega` and `b` may be omitted for topology-only
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(m: &IsingModel) -> Self {
        Self {
            n: m.order(),
            edges: m.graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
            omega: Some(m.omega.clone()),
            b: Some(m.b.clone()),
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        Self {
            n: g.order(),
            edges: g.edges().iter().map(|&(i, j)| [i, j]).collect(),
            omega: None,
            b: None,
        }
    }

    /// Topology only; parameters are ignored. Edges may be listed in any
    /// order.
    pub fn graph(&self) -> Result<Graph, MrfError> {
        Graph::new(self.n, self.edges.iter().map(|e| (e[0], e[1])))
    }

    /// Full model. `omega` is parallel to `edges` as written in the file.
    pub fn model(&self) -> Result<IsingModel, MrfError> {
        let omega = self
            .omega
            .as_ref()
            .ok_or_else(|| MrfError::Format("missing `omega`".into()))?;
        let b = self.b.clone().ok_or_else(|| MrfError::Format("missing `b`".into()))?;
        if omega.len() != self.edges.len() {
            return Err(MrfError::LengthMismatch {
                what: "edge couplings",
                expected: self.edges.len(),
                found: omega.len(),
            });
        }
        let triples: Vec<_> = self.edges.iter().zip(omega).map(|(e, &w)| (e[0], e[1], w)).collect();
        IsingModel::from_weighted_edges(self.n, &triples, b)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MrfError> {
        serde_json::from_str(s).map_err(|e| MrfError::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn aund_examples() {
        assert_eq!(average_unique_node_degree(&Graph::star(4).unwrap()), 2.0);
        assert_eq!(average_unique_node_degree(&Graph::path(3).unwrap()), 1.5);
        assert_eq!(average_unique_node_degree(&Graph::complete(3).unwrap()), 2.0);
        // isolated node contributes degree 0
        let g = Graph::new(3, [(0, 1)]).unwrap();
        assert_eq!(average_unique_node_degree(&g), 0.5);
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert_eq!(Graph::new(3, [(1, 1)]), Err(MrfError::SelfLoop(1)));
        assert_eq!(Graph::new(3, [(0, 1), (1, 0)]), Err(MrfError::DuplicateEdge(0, 1)));
        assert!(matches!(Graph::new(3, [(0, 3)]), Err(MrfError::NodeOutOfRange(..))));
        assert_eq!(Graph::empty(0), Err(MrfError::EmptyGraph));
    }

    #[test]
    fn canonical_edges_and_adjacency() {
        let g = Graph::new(4, [(3, 1), (2, 0), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3)]);
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.neighbors(1).collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(g.edge_index(3, 1), Some(2));
        assert_eq!(g.edge_index(2, 3), None);
        assert!(g.is_forest());
        assert!(!Graph::cycle(4).unwrap().is_forest());
    }

    #[test]
    fn generate_connected_graph_in_range() {
        let spec = GraphSpec::connected(10, 2.0, 3.0).unwrap();
        for seed in 0..20 {
            let g = generate_graph(&spec, seed).unwrap();
            assert_eq!(g.order(), 10);
            assert!(g.is_connected());
            let a = average_unique_node_degree(&g);
            assert!((2.0..=3.0).contains(&a), "aund {a}");
        }
    }

    #[test]
    fn generate_k4() {
        let spec = GraphSpec::connected(4, 3.0, 3.0).unwrap();
        let g = generate_graph(&spec, 1).unwrap();
        assert_eq!(g, Graph::complete(4).unwrap());
    }

    #[test]
    fn k4_is_only_four_node_graph_with_aund_three() {
        // exhaustive over all 2^6 edge subsets
        let all: Vec<(usize, usize)> = Graph::complete(4).unwrap().edges().to_vec();
        let hits: Vec<_> = (0u32..64)
            .map(|mask| Graph::new(4, all.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e)).unwrap())
            .filter(|g| average_unique_node_degree(g) == 3.0)
            .collect();
        assert_eq!(hits, vec![Graph::complete(4).unwrap()]);
    }

    #[test]
    fn infeasible_spec_is_exhausted() {
        let spec = GraphSpec::connected(2, 5.0, 6.0).unwrap();
        assert!(matches!(generate_graph(&spec, 0), Err(MrfError::GenerationExhausted { .. })));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GraphSpec::connected(12, 3.0, 4.0).unwrap();
        assert_eq!(generate_graph(&spec, 9).unwrap(), generate_graph(&spec, 9).unwrap());
    }

    #[test]
    fn disconnected_generation_allowed() {
        let spec = GraphSpec::new(8, 1.0, 2.0, false).unwrap();
        let g = generate_graph(&spec, 3).unwrap();
        let a = average_unique_node_degree(&g);
        assert!((1.0..=2.0).contains(&a));
    }

    #[test]
    fn sample_model_is_deterministic() {
        let g = Graph::cycle(6).unwrap();
        assert_eq!(sample_model(&g, 5), sample_model(&g, 5));
        assert_ne!(sample_model(&g, 5), sample_model(&g, 6));
    }

    fn mean_std(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn sampled_parameter_statistics() {
        // 100k couplings over a complete graph on 448 nodes (100_128 edges)
        let g = Graph::complete(448).unwrap();
        let m = sample_model(&g, 2024);
        let (mean, std) = mean_std(m.omega());
        assert!(mean.abs() <= 0.02, "omega mean {mean}");
        assert!((std - 1.0).abs() <= 0.02, "omega std {std}");

        let g = Graph::empty(100_000).unwrap();
        let m = sample_model(&g, 77);
        let (_, std) = mean_std(m.b());
        assert!((std - 0.25).abs() <= 0.01, "field std {std}");
    }

    #[test]
    fn energy_examples() {
        let g = Graph::cycle(3).unwrap();
        let m = IsingModel::new(g, vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(energy(&m, &Assignment::new(vec![1, -1, 1]).unwrap()), 0.0);

        let m = IsingModel::new(Graph::empty(1).unwrap(), vec![], vec![0.5]).unwrap();
        assert_eq!(energy(&m, &Assignment::new(vec![1]).unwrap()), 0.5);
        assert_eq!(energy(&m, &Assignment::new(vec![-1]).unwrap()), -0.5);

        let m = IsingModel::from_weighted_edges(2, &[(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        assert_eq!(energy(&m, &Assignment::new(vec![1, -1]).unwrap()), -1.0);
    }

    #[test]
    fn zero_edges_examples() {
        let m = IsingModel::from_weighted_edges(3, &[(0, 1, 1.2), (1, 2, -0.3)], vec![0.1, 0.2, 0.3]).unwrap();
        let z = zero_edges(&m);
        assert_eq!(z.omega(), &[0.0, 0.0]);
        assert_eq!(z.b(), m.b());
        assert_eq!(m.omega(), &[1.2, -0.3]);
        assert_eq!(zero_edges(&z), z);
    }

    #[test]
    fn assignment_validation() {
        assert_eq!(Assignment::new(vec![1, 0]), Err(MrfError::InvalidState(1, 0)));
        assert_eq!(Assignment::from_mask(3, 0b101).values(), &[1, -1, 1]);
    }

    #[test]
    fn model_length_checks() {
        let g = Graph::path(3).unwrap();
        assert!(matches!(IsingModel::new(g.clone(), vec![0.0], vec![0.0; 3]), Err(MrfError::LengthMismatch { .. })));
        assert!(matches!(IsingModel::new(g.clone(), vec![0.0; 2], vec![0.0; 2]), Err(MrfError::LengthMismatch { .. })));
        assert!(matches!(IsingModel::new(g, vec![f64::NAN, 0.0], vec![0.0; 3]), Err(MrfError::NonFinite("edge", 0))));
    }

    #[test]
    fn model_file_round_trip_and_reordering() {
        let doc = r#"{"n": 3, "edges": [[1, 2], [0, 1]], "omega": [0.5, -1.0], "b": [0.1, 0.2, 0.3]}"#;
        let m = ModelFile::from_json(doc).unwrap().model().unwrap();
        assert_eq!(m.graph().edges(), &[(0, 1), (1, 2)]);
        assert_eq!(m.omega(), &[-1.0, 0.5]);
        let back = ModelFile::from_json(&ModelFile::from_model(&m).to_json()).unwrap().model().unwrap();
        assert_eq!(back, m);

        let topo = ModelFile::from_json(r#"{"n": 2, "edges": [[0, 1]]}"#).unwrap();
        assert!(topo.graph().is_ok());
        assert!(matches!(topo.model(), Err(MrfError::Format(_))));
    }

    #[test]
    fn permutation_moves_parameters() {
        let m = IsingModel::from_weighted_edges(3, &[(0, 1, 0.7)], vec![1.0, 2.0, 3.0]).unwrap();
        let p = m.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.graph().edges(), &[(0, 2)]);
        assert_eq!(p.omega(), &[0.7]);
        assert_eq!(p.b(), &[2.0, 3.0, 1.0]);
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..30).prop_map(move |pairs| {
                let set: BTreeSet<_> = pairs.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
                Graph::new(n, set).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn aund_between_min_and_max_degree(g in arb_graph()) {
            let d = g.degrees();
            let a = average_unique_node_degree(&g);
            prop_assert!(*d.iter().min().unwrap() as f64 <= a);
            prop_assert!(a <= *d.iter().max().unwrap() as f64);
        }

        #[test]
        fn adjacency_matches_edges(g in arb_graph()) {
            for i in 0..g.order() {
                for j in g.neighbors(i) {
                    prop_assert!(g.edge_index(i, j).is_some());
                }
            }
            let total: usize = g.degrees().iter().sum();
            prop_assert_eq!(total, 2 * g.edge_count());
        }

        #[test]
        fn generated_graphs_meet_spec(order in 4usize..16, lo in 1u32..4, width in 0u32..2, seed in any::<u64>()) {
            let lo = lo as f64;
            let hi = lo + width as f64;
            let spec = GraphSpec::connected(order, lo, hi).unwrap();
            if let Ok(g) = generate_graph(&spec, seed) {
                prop_assert_eq!(g.order(), order);
                prop_assert!(g.is_connected());
                let a = average_unique_node_degree(&g);
                prop_assert!(a >= lo && a <= hi);
                for &(i, j) in g.edges() {
                    prop_assert!(i < j && j < order);
                }
            }
        }

        #[test]
        fn energy_is_linear_in_one_coupling(seed in any::<u64>(), c in -3.0f64..3.0, mask in any::<u64>()) {
            let g = Graph::cycle(5).unwrap();
            let m = sample_model(&g, seed);
            let a = Assignment::from_mask(5, mask);
            let (i, j) = g.edges()[0];
            let mut omega = m.omega().to_vec();
            omega[0] *= c;
            let scaled = IsingModel::new(g.clone(), omega, m.b().to_vec()).unwrap();
            let expected = (c - 1.0) * m.omega()[0] * a.get(i) * a.get(j);
            let diff = energy(&scaled, &a) - energy(&m, &a);
            prop_assert!((diff - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn exp_minus_energy_normalizes() {
        let spec = GraphSpec::connected(10, 2.0, 4.0).unwrap();
        for seed in 0..5 {
            let m = sample_model(&generate_graph(&spec, seed).unwrap(), seed);
            let energies: Vec<f64> = (0..1u64 << 10).map(|s| energy(&m, &Assignment::from_mask(10, s))).collect();
            let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
            let z: f64 = energies.iter().map(|e| (-(e - min)).exp()).sum();
            let total: f64 = energies.iter().map(|e| (-(e - min)).exp() / z).sum();
            assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}
