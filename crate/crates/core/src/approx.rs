//! Approximate inference baselines: loopy belief propagation and Gibbs
//! sampling.

use rand::Rng as _;

use crate::marginals::{MarginalSet, NodeMarginal};
use crate::mrf::{Assignment, Graph, IsingModel};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpConfig {
    /// Stop once the largest absolute message change is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight on the previous message, `new = d·old + (1-d)·computed`.
    pub damping: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 200,
            damping: 0.5,
        }
    }
}

impl BpConfig {
    /// Default settings with damping switched off on forests, where
    /// undamped propagation is exact and converges in diameter steps.
    pub fn for_graph(g: &Graph) -> Self {
        Self {
            damping: if g.is_forest() { 0.0 } else { 0.5 },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub marginals: MarginalSet,
    pub converged: bool,
    pub iterations_used: usize,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

// Normalizes a pair of log weights into probabilities.
fn normalize_log(lm: f64, lp: f64) -> [f64; 2] {
    let p = 1.0 / (1.0 + (lm - lp).exp());
    [1.0 - p, p]
}

const STATES: [f64; 2] = [-1.0, 1.0];

/// Synchronous sum-product message passing.
///
/// Messages run along both directions of every edge and start uniform. The
/// message from `i` to `j` is
/// `m(x_j) ∝ Σ_{x_i} exp(-b_i x_i - ω_ij (x_i x_j - 1)) Π_{k ∈ N(i)\j} m_{k→i}(x_i)`,
/// evaluated in log space and normalized to sum to one. Beliefs are
/// `exp(-b_i x_i)` times every incoming message, normalized.
///
/// Non-convergence is reported through [`BpResult::converged`].
pub fn bp_marginals(m: &IsingModel, cfg: &BpConfig) -> BpResult {
    assert!(cfg.tolerance > 0.0, "tolerance must be positive");
    assert!((0.0..1.0).contains(&cfg.damping), "damping must lie in [0, 1)");
    let g = m.graph();
    let omega = m.omega();
    let b = m.b();
    let n = g.order();
    // slot 2e carries lo→hi along edge e, slot 2e+1 carries hi→lo
    let mut msgs = vec![[0.5f64; 2]; 2 * g.edge_count()];
    let mut next = msgs.clone();
    let incoming = |msgs: &[[f64; 2]], i: usize, from: usize, ei: usize| -> [f64; 2] {
        msgs[2 * ei + usize::from(from > i)]
    };

    let mut converged = false;
    let mut iterations_used = 0;
    for it in 1..=cfg.max_iterations {
        iterations_used = it;
        let mut delta: f64 = 0.0;
        for (ei, &(lo, hi)) in g.edges().iter().enumerate() {
            for (slot, (src, dst)) in [(lo, hi), (hi, lo)].into_iter().enumerate() {
                let mut cavity = [-b[src] * STATES[0], -b[src] * STATES[1]];
                for &(k, ek) in g.incident(src) {
                    if k == dst {
                        continue;
                    }
                    let mk = incoming(&msgs, src, k, ek);
                    cavity[0] += mk[0].ln();
                    cavity[1] += mk[1].ln();
                }
                let w = omega[ei];
                let out: Vec<f64> = STATES
                    .iter()
                    .map(|&xj| {
                        log_add_exp(
                            cavity[0] - w * (STATES[0] * xj - 1.0),
                            cavity[1] - w * (STATES[1] * xj - 1.0),
                        )
                    })
                    .collect();
                let computed = normalize_log(out[0], out[1]);
                let old = msgs[2 * ei + slot];
                let new = [
                    cfg.damping * old[0] + (1.0 - cfg.damping) * computed[0],
                    cfg.damping * old[1] + (1.0 - cfg.damping) * computed[1],
                ];
                debug_assert!(
                    new.iter().all(|v| v.is_finite() && *v >= 0.0) && (new[0] + new[1] - 1.0).abs() < 1e-9,
                    "message not normalized: {new:?}"
                );
                delta = delta.max((new[0] - old[0]).abs()).max((new[1] - old[1]).abs());
                next[2 * ei + slot] = new;
            }
        }
        std::mem::swap(&mut msgs, &mut next);
        if delta <= cfg.tolerance {
            converged = true;
            break;
        }
    }

    let marginals = (0..n)
        .map(|i| {
            let mut lb = [-b[i] * STATES[0], -b[i] * STATES[1]];
            for &(k, ek) in g.incident(i) {
                let mk = incoming(&msgs, i, k, ek);
                lb[0] += mk[0].ln();
                lb[1] += mk[1].ln();
            }
            let [pm, pp] = normalize_log(lb[0], lb[1]);
            debug_assert!(pm.is_finite() && pp.is_finite());
            NodeMarginal { p_minus: pm, p_plus: pp }
        })
        .collect();
    BpResult {
        marginals,
        converged,
        iterations_used,
    }
}

/// `p(θ_i = +1 | θ_{N(i)}) = 1 / (1 + exp(2 (b_i + Σ_j ω_ij θ_j)))`.
pub fn gibbs_conditional(m: &IsingModel, i: usize, a: &Assignment) -> f64 {
    let omega = m.omega();
    let local = m.b()[i]
        + m.graph()
            .incident(i)
            .iter()
            .map(|&(j, e)| omega[e] * a.get(j))
            .sum::<f64>();
    1.0 / (1.0 + (2.0 * local).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub burn_in_sweeps: usize,
    pub sample_sweeps: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in_sweeps: 1_000,
            sample_sweeps: 10_000,
            seed: 0,
        }
    }
}

/// Systematic-scan Gibbs chain started from the all-`+1` state.
pub struct GibbsSampler<'a> {
    model: &'a IsingModel,
    state: Assignment,
    rng: Rng,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(model: &'a IsingModel, seed: u64) -> Self {
        Self {
            model,
            state: Assignment::all_plus(model.order()),
            rng: rng_from_seed(seed),
        }
    }

    /// Resamples every node once, in ascending index order.
    pub fn sweep(&mut self) {
        for i in 0..self.model.order() {
            let p = gibbs_conditional(self.model, i, &self.state);
            let u: f64 = self.rng.random();
            self.state.set(i, u < p);
        }
    }

    pub fn state(&self) -> &Assignment {
        &self.state
    }
}

/// Fraction of retained sweeps in which each node is `+1`.
pub fn gibbs_marginals(m: &IsingModel, cfg: &GibbsConfig) -> MarginalSet {
    assert!(cfg.burn_in_sweeps >= 1 && cfg.sample_sweeps >= 1, "sweep counts must be positive");
    let mut chain = GibbsSampler::new(m, cfg.seed);
    for _ in 0..cfg.burn_in_sweeps {
        chain.sweep();
    }
    let mut plus = vec![0u64; m.order()];
    for _ in 0..cfg.sample_sweeps {
        chain.sweep();
        for (c, &v) in plus.iter_mut().zip(chain.state().values()) {
            *c += u64::from(v > 0);
        }
    }
    MarginalSet::from_plus(plus.into_iter().map(|c| c as f64 / cfg.sample_sweeps as f64))
}
