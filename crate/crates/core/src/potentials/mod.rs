//! Data-driven Ising parameters.
//!
//! Intact-state feature densities are Gaussian mixtures chosen by BIC, the
//! damaged state is uniform over a three-sigma domain around the intact
//! data, and couplings follow from the normalized mutual information of
//! paired features.

pub mod gmm;
pub mod mi;

use thiserror::Error;

use crate::mrf::{Graph, IsingModel, MrfError};
use crate::rng::derive_seed;

pub use gmm::{fit_gmm, select_k_bic, Gmm, Gmm1, Gmm2};
pub use mi::{edge_potential, edge_probability, mi_and_entropies, mutual_information_mc, normalized_mi, MiEstimate};

/// Densities are floored at this value before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("need at least {needed} samples, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("feature data contains non-finite values")]
    NonFinite,
    #[error("mixture component {component} collapsed")]
    DegenerateComponent { component: usize },
    #[error("no mixture order in 1..={k_max} could be fitted")]
    NoValidFit { k_max: usize },
    #[error("feature samples have zero variance")]
    ZeroVariance,
    #[error("entropy estimates must be positive (got {entropy_i}, {entropy_j})")]
    NonPositiveEntropy { entropy_i: f64, entropy_j: f64 },
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("node {node}: {source}")]
    Node { node: usize, source: Box<PotentialError> },
    #[error("edge ({i}, {j}): {source}")]
    Edge { i: usize, j: usize, source: Box<PotentialError> },
    #[error(transparent)]
    Model(#[from] MrfError),
}

/// Plausible feature range `[lower, upper]` for the damaged state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageDomain {
    pub lower: f64,
    pub upper: f64,
}

impl DamageDomain {
    pub fn contains(&self, x: f64) -> bool {
        (self.lower..=self.upper).contains(&x)
    }

    /// Uniform density over the domain, zero outside.
    pub fn density(&self, x: f64) -> f64 {
        if self.contains(x) {
            1.0 / (self.upper - self.lower)
        } else {
            0.0
        }
    }
}

/// `[μ - 3σ, μ + 3σ]` with the population standard deviation.
pub fn damage_domain(samples: &[f64]) -> Result<DamageDomain, PotentialError> {
    if samples.len() < 2 {
        return Err(PotentialError::InsufficientData {
            needed: 2,
            found: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(PotentialError::NonFinite);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return Err(PotentialError::ZeroVariance);
    }
    Ok(DamageDomain {
        lower: mean - 3.0 * sd,
        upper: mean + 3.0 * sd,
    })
}

/// `½ (ln P_d - ln P_u)` with both densities floored.
///
/// Positive values favour the damaged state. The Ising field uses the
/// opposite sign because `p(θ) ∝ exp(-b θ)`; see [`build_model`].
pub fn node_potential(intact_density: f64, damaged_density: f64) -> f64 {
    0.5 * (gmm::floored_ln(damaged_density) - gmm::floored_ln(intact_density))
}

/// Intact-state feature measurements: one column per node, one row per
/// repeated measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self, PotentialError> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.is_empty() || rows < 2 {
            return Err(PotentialError::InsufficientData { needed: 2, found: rows });
        }
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(PotentialError::ShapeMismatch(format!(
                "column {i} has {} rows, expected {rows}",
                c.len()
            )));
        }
        if columns.iter().flatten().any(|x| !x.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        Ok(Self { columns })
    }

    pub fn nodes(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn paired(&self, i: usize, j: usize) -> Vec<[f64; 2]> {
        self.columns[i].iter().zip(&self.columns[j]).map(|(&a, &b)| [a, b]).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    pub k_max: usize,
    /// Monte Carlo draws per edge for the information estimates.
    pub mi_samples: usize,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            k_max: 10,
            mi_samples: 100_000,
            seed: 0,
        }
    }
}

/// Learned model plus per-node and per-edge diagnostics.
#[derive(Debug, Clone)]
pub struct BuildReport {
    pub model: IsingModel,
    /// Mixture order chosen for each node.
    pub node_k: Vec<usize>,
    /// `½ (ln P_d - ln P_u)` per node.
    pub node_potentials: Vec<f64>,
    /// Normalized mutual information per edge, in edge order.
    pub edge_nmi: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Learns an Ising model on `topology` from intact feature data and the
/// current mean of each node's feature.
///
/// Per node: BIC-selected mixture on the intact samples gives `P_u` at the
/// current mean, the three-sigma domain gives the uniform `P_d` (floored
/// outside the domain, with a warning), and the field is
/// `b_i = ½ (ln P_u - ln P_d)` so that `P_d > P_u` pushes `p(θ_i = +1)`
/// above one half. Per edge: BIC-selected bivariate mixture on the paired
/// samples, Monte Carlo mutual information and entropies from its exact
/// marginals, then normalization, interpolation and
/// `ω_ij = ½ (ln(1 - p_ij) - ln p_ij)`.
pub fn build_model(
    topology: &Graph,
    data: &FeatureTable,
    current_means: &[f64],
    cfg: &BuildConfig,
) -> Result<BuildReport, PotentialError> {
    let n = topology.order();
    if data.nodes() != n || current_means.len() != n {
        return Err(PotentialError::ShapeMismatch(format!(
            "topology has {n} nodes, data has {} columns and {} current means",
            data.nodes(),
            current_means.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut node_k = Vec::with_capacity(n);
    let mut node_potentials = Vec::with_capacity(n);
    for (i, &mean) in current_means.iter().enumerate() {
        let wrap = |e| PotentialError::Node { node: i, source: Box::new(e) };
        let samples: Vec<[f64; 1]> = data.column(i).iter().map(|&x| [x]).collect();
        let (k, g) = select_k_bic(&samples, cfg.k_max, derive_seed(cfg.seed, i as u64)).map_err(wrap)?;
        let domain = damage_domain(data.column(i)).map_err(wrap)?;
        if !domain.contains(mean) {
            let msg = format!(
                "node {i}: current mean {mean} lies outside the damage domain [{}, {}]; damaged density floored",
                domain.lower, domain.upper
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        node_k.push(k);
        node_potentials.push(node_potential(g.density(&[mean]), domain.density(mean)));
    }

    let mut omega = Vec::with_capacity(topology.edge_count());
    let mut edge_nmi = Vec::with_capacity(topology.edge_count());
    for (e, &(i, j)) in topology.edges().iter().enumerate() {
        let wrap = |err| PotentialError::Edge { i, j, source: Box::new(err) };
        let stream = derive_seed(cfg.seed, (n + e) as u64);
        let paired = data.paired(i, j);
        let (_, joint) = select_k_bic(&paired, cfg.k_max, stream).map_err(wrap)?;
        let est = mi_and_entropies(
            &joint,
            &joint.marginal(0),
            &joint.marginal(1),
            cfg.mi_samples,
            derive_seed(stream, 1),
        );
        let nmi = normalized_mi(est.mutual_information, est.entropy_i, est.entropy_j).map_err(wrap)?;
        edge_nmi.push(nmi);
        omega.push(edge_potential(edge_probability(nmi)));
    }

    let b = node_potentials.iter().map(|p| -p).collect();
    let model = IsingModel::new(topology.clone(), omega, b)?;
    Ok(BuildReport {
        model,
        node_k,
        node_potentials,
        edge_nmi,
        warnings,
    })
}
