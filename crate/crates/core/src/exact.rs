//! Exact inference: enumeration over all joint states and variable
//! elimination with log-domain factors.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::marginals::{MarginalSet, NodeMarginal};
use crate::mrf::{energy, Assignment, Graph, IsingModel};

/// Largest model order accepted by the enumeration routines.
pub const MAX_ENUMERATION_ORDER: usize = 25;
/// Largest order for which [`joint_distribution`] materializes every state.
pub const MAX_JOINT_ORDER: usize = 20;
/// [`exact_marginals`] enumerates up to this order and eliminates above it.
pub const BRUTE_FORCE_LABEL_ORDER: usize = 16;

// exact energy is recomputed this often during Gray-code enumeration
const RESYNC_INTERVAL: u64 = 1 << 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferError {
    #[error("model has {n} nodes; enumeration is limited to {max}")]
    TooLarge { n: usize, max: usize },
}

struct Enumeration {
    log_z: f64,
    p_plus: Vec<f64>,
}

/// Walks all `2^n` states in Gray-code order, updating the energy one spin
/// flip at a time, and accumulates `exp(-energy)` with a running shift.
fn enumerate(m: &IsingModel) -> Result<Enumeration, InferError> {
    let n = m.order();
    if n > MAX_ENUMERATION_ORDER {
        return Err(InferError::TooLarge {
            n,
            max: MAX_ENUMERATION_ORDER,
        });
    }
    let g = m.graph();
    let omega = m.omega();
    let b = m.b();
    let mut spins = vec![-1.0f64; n];
    let mut mask: u64 = 0;
    let mut e = energy(m, &Assignment::from_mask(n, 0));
    let mut shift = e;
    let mut total = 0.0;
    let mut plus = vec![0.0; n];

    for k in 0..1u64 << n {
        if k > 0 {
            let i = k.trailing_zeros() as usize;
            let local: f64 = b[i] + g.incident(i).iter().map(|&(j, ei)| omega[ei] * spins[j]).sum::<f64>();
            e -= 2.0 * spins[i] * local;
            spins[i] = -spins[i];
            mask ^= 1 << i;
            if k % RESYNC_INTERVAL == 0 {
                e = energy(m, &Assignment::from_mask(n, mask));
            }
        }
        if e < shift {
            let scale = (e - shift).exp();
            total *= scale;
            plus.iter_mut().for_each(|p| *p *= scale);
            shift = e;
        }
        let w = (shift - e).exp();
        total += w;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            plus[i] += w;
            bits &= bits - 1;
        }
    }
    Ok(Enumeration {
        log_z: total.ln() - shift,
        p_plus: plus.into_iter().map(|p| p / total).collect(),
    })
}

/// Exact marginals by summing `exp(-energy)` over every joint state.
pub fn brute_force_marginals(m: &IsingModel) -> Result<MarginalSet, InferError> {
    Ok(MarginalSet::from_plus(enumerate(m)?.p_plus))
}

/// `ln Σ_θ exp(-energy(θ))`.
pub fn log_partition(m: &IsingModel) -> Result<f64, InferError> {
    Ok(enumerate(m)?.log_z)
}

/// Probability of every joint state, indexed by bitmask (bit `i` set means
/// node `i` is `+1`).
pub fn joint_distribution(m: &IsingModel) -> Result<Vec<f64>, InferError> {
    let n = m.order();
    if n > MAX_JOINT_ORDER {
        return Err(InferError::TooLarge { n, max: MAX_JOINT_ORDER });
    }
    let neg_e: Vec<f64> = (0..1u64 << n).map(|s| -energy(m, &Assignment::from_mask(n, s))).collect();
    let max = neg_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = neg_e.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Table over the joint states of `scope`, stored as natural logarithms.
///
/// Entry index enumerates assignments in binary counting order with
/// `-1 ↦ 0`, `+1 ↦ 1` and the last scope variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    log_table: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, log_table: Vec<f64>) -> Self {
        assert_eq!(log_table.len(), 1 << scope.len(), "table must have 2^|scope| entries");
        Self { scope, log_table }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn log_table(&self) -> &[f64] {
        &self.log_table
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.contains(&var)
    }

    /// Node potential `exp(-b θ)`.
    pub fn node(i: usize, b: f64) -> Self {
        Self::new(vec![i], vec![b, -b])
    }

    /// Edge potential `exp(-ω θ_i θ_j)`.
    pub fn edge(i: usize, j: usize, omega: f64) -> Self {
        Self::new(vec![i, j], vec![-omega, omega, omega, -omega])
    }

    /// Product of factors over the sorted union of their scopes.
    pub fn product(factors: &[&Factor]) -> Factor {
        let scope: Vec<usize> = factors
            .iter()
            .flat_map(|f| f.scope.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let k = scope.len();
        // bit shift in the union index for each factor's scope position
        let shifts: Vec<Vec<usize>> = factors
            .iter()
            .map(|f| {
                f.scope
                    .iter()
                    .map(|v| k - 1 - scope.binary_search(v).expect("variable in union"))
                    .collect()
            })
            .collect();
        let log_table = (0..1usize << k)
            .map(|a| {
                factors
                    .iter()
                    .zip(&shifts)
                    .map(|(f, sh)| {
                        let idx = sh.iter().fold(0usize, |acc, &s| (acc << 1) | (a >> s & 1));
                        f.log_table[idx]
                    })
                    .sum()
            })
            .collect();
        Factor { scope, log_table }
    }

    /// Marginalizes `var` out with log-sum-exp.
    pub fn sum_out(&self, var: usize) -> Factor {
        let pos = self.scope.iter().position(|&v| v == var).expect("variable in scope");
        let k = self.scope.len();
        let shift = k - 1 - pos;
        let low_mask = (1usize << shift) - 1;
        let log_table = (0..1usize << (k - 1))
            .map(|a| {
                let base = ((a & !low_mask) << 1) | (a & low_mask);
                log_add_exp(self.log_table[base], self.log_table[base | 1 << shift])
            })
            .collect();
        let mut scope = self.scope.clone();
        scope.remove(pos);
        Factor { scope, log_table }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// One node factor per node and one edge factor per edge.
pub fn model_factors(m: &IsingModel) -> Vec<Factor> {
    let nodes = m.b().iter().enumerate().map(|(i, &b)| Factor::node(i, b));
    let edges = m
        .graph()
        .edges()
        .iter()
        .zip(m.omega())
        .map(|(&(i, j), &w)| Factor::edge(i, j, w));
    nodes.chain(edges).collect()
}

/// Greedy minimum-degree elimination order over every node except `query`,
/// measured in the evolving fill-in graph; ties go to the lowest index.
pub fn min_degree_order(g: &Graph, query: Option<usize>) -> Vec<usize> {
    let n = g.order();
    let mut adj: Vec<BTreeSet<usize>> = (0..n).map(|i| g.neighbors(i).collect()).collect();
    let mut remaining: BTreeSet<usize> = (0..n).filter(|&v| Some(v) != query).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while let Some(&v) = remaining.iter().min_by_key(|&&v| (adj[v].len(), v)) {
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            adj[x].remove(&v);
            for &y in &nbrs[a + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
        adj[v].clear();
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Largest neighbor count met while eliminating `order` (the induced width);
/// intermediate factors have at most `width + 1` variables.
pub fn elimination_width(g: &Graph, order: &[usize]) -> usize {
    let mut adj: Vec<BTreeSet<usize>> = (0..g.order()).map(|i| g.neighbors(i).collect()).collect();
    let mut width = 0;
    for &v in order {
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nbrs.len());
        for (a, &x) in nbrs.iter().enumerate() {
            adj[x].remove(&v);
            for &y in &nbrs[a + 1..] {
                adj[x].insert(y);
                adj[y].insert(x);
            }
        }
        adj[v].clear();
    }
    width
}

/// Exact marginal of `query` by variable elimination along
/// [`min_degree_order`].
///
/// Evidence is expected to be folded into the node fields already (see
/// [`IsingModel::with_evidence`]), so no factor reduction step is needed.
pub fn variable_elimination_marginal(m: &IsingModel, query: usize) -> NodeMarginal {
    assert!(query < m.order(), "query node {query} out of range");
    let order = min_degree_order(m.graph(), Some(query));
    let mut factors = model_factors(m);
    for z in order {
        let (with_z, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(z));
        factors = rest;
        if with_z.is_empty() {
            continue;
        }
        let refs: Vec<&Factor> = with_z.iter().collect();
        factors.push(Factor::product(&refs).sum_out(z));
    }
    let refs: Vec<&Factor> = factors.iter().collect();
    let belief = Factor::product(&refs);
    debug_assert_eq!(belief.scope(), &[query]);
    let (lm, lp) = (belief.log_table[0], belief.log_table[1]);
    NodeMarginal::from_plus(1.0 / (1.0 + (lm - lp).exp()))
}

/// Runs [`variable_elimination_marginal`] once per node.
pub fn variable_elimination_marginals(m: &IsingModel) -> MarginalSet {
    (0..m.order()).map(|q| variable_elimination_marginal(m, q)).collect()
}

/// Largest induced width over the per-query elimination orders.
pub fn max_query_width(g: &Graph) -> usize {
    (0..g.order())
        .map(|q| elimination_width(g, &min_degree_order(g, Some(q))))
        .max()
        .unwrap_or(0)
}

/// Ground-truth marginals: enumeration up to [`BRUTE_FORCE_LABEL_ORDER`]
/// nodes, variable elimination above.
pub fn exact_marginals(m: &IsingModel) -> MarginalSet {
    if m.order() <= BRUTE_FORCE_LABEL_ORDER {
        brute_force_marginals(m).expect("order within enumeration bound")
    } else {
        variable_elimination_marginals(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrf::{generate_graph, sample_model, zero_edges, GraphSpec};

    fn single(b: f64) -> IsingModel {
        IsingModel::new(Graph::empty(1).unwrap(), vec![], vec![b]).unwrap()
    }

    // Direct summation with no incremental updates, used as an oracle.
    fn naive_marginals(m: &IsingModel) -> Vec<f64> {
        let n = m.order();
        let w: Vec<f64> = (0..1u64 << n).map(|s| (-energy(m, &Assignment::from_mask(n, s))).exp()).collect();
        let z: f64 = w.iter().sum();
        (0..n)
            .map(|i| (0..1u64 << n).filter(|s| s >> i & 1 == 1).map(|s| w[s as usize]).sum::<f64>() / z)
            .collect()
    }

    #[test]
    fn brute_force_examples() {
        let m = brute_force_marginals(&single(0.0)).unwrap();
        assert_eq!(m.get(0), NodeMarginal::uniform());

        let p = brute_force_marginals(&single(0.5)).unwrap().get(0).p_plus;
        assert!((p - 1.0 / (1.0 + 1f64.exp())).abs() < 1e-15);
        assert!((p - 0.26894).abs() < 1e-5);

        let w = -(3f64.ln()) / 2.0;
        let m = IsingModel::from_weighted_edges(2, &[(0, 1, w)], vec![0.0, 0.0]).unwrap();
        let marg = brute_force_marginals(&m).unwrap();
        for node in marg.iter() {
            assert!((node.p_plus - 0.5).abs() < 1e-14);
        }
        let joint = joint_distribution(&m).unwrap();
        // masks 0b00 and 0b11 are the agreeing states
        assert!((joint[0] + joint[3] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn too_large_is_rejected() {
        let m = sample_model(&Graph::path(26).unwrap(), 0);
        assert_eq!(brute_force_marginals(&m), Err(InferError::TooLarge { n: 26, max: 25 }));
        assert!(log_partition(&m).is_err());
    }

    #[test]
    fn log_partition_examples() {
        assert!((log_partition(&single(0.0)).unwrap() - 2f64.ln()).abs() < 1e-15);
        let m = IsingModel::new(Graph::empty(2).unwrap(), vec![], vec![0.0, 0.0]).unwrap();
        assert!((log_partition(&m).unwrap() - 4f64.ln()).abs() < 1e-15);
        let m = IsingModel::from_weighted_edges(2, &[(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
        let direct: f64 = (0..4u64).map(|s| (-energy(&m, &Assignment::from_mask(2, s))).exp()).sum::<f64>().ln();
        let lz = log_partition(&m).unwrap();
        assert!((lz - direct).abs() < 1e-14);
        assert!((lz - (2.0 * (-1f64).exp() + 2.0 * 1f64.exp()).ln()).abs() < 1e-14);
        assert!((lz - 1.820_075).abs() < 1e-6);
    }

    #[test]
    fn log_partition_survives_large_energies() {
        // weights far beyond exp overflow
        let g = Graph::complete(8).unwrap();
        let m = IsingModel::new(g.clone(), vec![-200.0; g.edge_count()], vec![0.0; 8]).unwrap();
        let lz = log_partition(&m).unwrap();
        // two ground states at energy -200 * 28
        assert!((lz - (200.0 * 28.0 + 2f64.ln())).abs() < 1e-9);
        let marg = brute_force_marginals(&m).unwrap();
        assert!(marg.is_valid(1e-12));
    }

    #[test]
    fn enumeration_matches_naive_summation() {
        let spec = GraphSpec::connected(9, 2.0, 5.0).unwrap();
        for seed in 0..10 {
            let m = sample_model(&generate_graph(&spec, seed).unwrap(), 100 + seed);
            let fast = brute_force_marginals(&m).unwrap().p_plus();
            let slow = naive_marginals(&m);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn factor_layout_last_variable_fastest() {
        let f = Factor::edge(2, 5, 0.3);
        assert_eq!(f.log_table(), &[-0.3, 0.3, 0.3, -0.3]);
        let p = Factor::product(&[&Factor::node(5, 1.0), &Factor::node(2, 2.0)]);
        assert_eq!(p.scope(), &[2, 5]);
        // (θ2, θ5) = (-,-), (-,+), (+,-), (+,+)
        assert_eq!(p.log_table(), &[3.0, 1.0, -1.0, -3.0]);
        let s = p.sum_out(2);
        assert_eq!(s.scope(), &[5]);
        assert!((s.log_table()[0] - log_add_exp(3.0, -1.0)).abs() < 1e-15);
        assert!((s.log_table()[1] - log_add_exp(1.0, -3.0)).abs() < 1e-15);
    }

    #[test]
    fn min_degree_order_examples() {
        assert_eq!(min_degree_order(&Graph::path(3).unwrap(), Some(1)), vec![0, 2]);
        assert_eq!(min_degree_order(&Graph::complete(4).unwrap(), None), vec![0, 1, 2, 3]);
        // once a single leaf remains it ties with the center and the lower
        // index goes first
        assert_eq!(min_degree_order(&Graph::star(6).unwrap(), None), vec![1, 2, 3, 4, 0, 5]);
        // with the center as query every leaf is eliminated
        assert_eq!(min_degree_order(&Graph::star(4).unwrap(), Some(0)), vec![1, 2, 3]);
    }

    #[test]
    fn widths() {
        let g = Graph::path(10).unwrap();
        assert_eq!(elimination_width(&g, &min_degree_order(&g, None)), 1);
        let g = Graph::complete(6).unwrap();
        assert_eq!(max_query_width(&g), 5);
        assert_eq!(max_query_width(&Graph::cycle(8).unwrap()), 2);
    }

    #[test]
    fn ve_matches_brute_force() {
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        let mut seed = 0;
        while checked < 200 {
            seed += 1;
            let n = 4 + (seed as usize % 7);
            let spec = GraphSpec::connected(n, 2.0, 6.0).unwrap();
            let Ok(g) = generate_graph(&spec, seed) else { continue };
            let m = sample_model(&g, seed * 31 + 7);
            let bf = brute_force_marginals(&m).unwrap();
            let ve = variable_elimination_marginals(&m);
            assert!(ve.is_valid(1e-9));
            worst = worst.max(bf.max_abs_diff(&ve));
            checked += 1;
        }
        assert!(worst <= 1e-10, "max deviation {worst}");
    }

    #[test]
    fn ve_single_node_closed_form() {
        for b in [-1.3, 0.0, 0.5, 2.0] {
            let p = variable_elimination_marginal(&single(b), 0).p_plus;
            assert!((p - 1.0 / (1.0 + (2.0 * b).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn ve_on_long_chain() {
        let m = sample_model(&Graph::path(20).unwrap(), 3);
        let start = std::time::Instant::now();
        let ve = variable_elimination_marginals(&m);
        assert!(start.elapsed().as_secs_f64() < 0.5);
        assert!(ve.is_valid(1e-12));
        let bf = brute_force_marginals(&m).unwrap();
        assert!(bf.max_abs_diff(&ve) < 1e-10);
    }

    #[test]
    fn ve_handles_disconnected_models() {
        let m = IsingModel::from_weighted_edges(5, &[(0, 1, 0.8), (3, 4, -1.1)], vec![0.1, -0.2, 0.3, 0.4, -0.5]).unwrap();
        let bf = brute_force_marginals(&m).unwrap();
        assert!(bf.max_abs_diff(&variable_elimination_marginals(&m)) < 1e-12);
    }

    #[test]
    fn posterior_from_prior_and_likelihood_matches_field_model() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(5);
        for n in 2..=6 {
            let g = generate_graph(&GraphSpec::new(n, 1.0, n as f64, false).unwrap(), n as u64).unwrap();
            let omega: Vec<f64> = (0..g.edge_count()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let k: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // prior from pairwise potentials, likelihood from per-node terms
            let states = 1u64 << n;
            let prior: Vec<f64> = (0..states)
                .map(|s| {
                    let a = Assignment::from_mask(n, s);
                    g.edges()
                        .iter()
                        .zip(&omega)
                        .map(|(&(i, j), w)| (-w * a.get(i) * a.get(j)).exp())
                        .product()
                })
                .collect();
            let zp: f64 = prior.iter().sum();
            let likelihood: Vec<f64> = (0..states)
                .map(|s| {
                    let a = Assignment::from_mask(n, s);
                    (0..n).map(|i| (-k[i] * a.get(i) * d[i]).exp()).product()
                })
                .collect();
            let joint: Vec<f64> = prior.iter().zip(&likelihood).map(|(p, l)| p / zp * l).collect();
            let zj: f64 = joint.iter().sum();
            let m = IsingModel::with_evidence(g.clone(), omega.clone(), &k, &d).unwrap();
            let conditional = joint_distribution(&m).unwrap();
            for (a, b) in joint.iter().zip(&conditional) {
                assert!((a / zj - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_edge_marginals_factorize() {
        let spec = GraphSpec::connected(8, 2.0, 4.0).unwrap();
        for seed in 0..10 {
            let m = zero_edges(&sample_model(&generate_graph(&spec, seed).unwrap(), seed));
            let marg = brute_force_marginals(&m).unwrap();
            for (node, &b) in marg.iter().zip(m.b()) {
                assert!((node.p_plus - 1.0 / (1.0 + (2.0 * b).exp())).abs() <= 1e-12);
                assert!((node.p_minus - 1.0 / (1.0 + (-2.0 * b).exp())).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn exact_marginals_switches_algorithm() {
        let m = sample_model(&Graph::path(18).unwrap(), 1);
        let a = exact_marginals(&m);
        let b = brute_force_marginals(&m).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
    }
}
