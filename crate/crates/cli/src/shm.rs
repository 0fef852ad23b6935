//! Synthetic monitoring data and the learn-infer-classify pipeline.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;
use std::time::Instant;

use isingnn_core::metrics::{classification_report, classify_nodes, mean_node_kl, ClassificationReport};
use isingnn_core::mrf::{zero_edges, ModelFile};
use isingnn_core::potentials::{build_model, BuildConfig, BuildReport, FeatureTable};
use isingnn_core::rng::{derive_seed, rng_from_seed, Rng};
use isingnn_core::{Graph, IsingModel, MarginalSet};
use isingnn_gnn::GnnParams;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::algorithms::{exact_truth, run_inference, ve_feasible, Algorithm, InferOptions};
use crate::error::CliError;

/// 16-joint planar truss: two chords of eight joints with verticals and
/// alternating diagonals.
pub const TRUSS16: &str = include_str!("../assets/truss16.json");
/// Four-storey frame with a 3 × 3 column grid per floor.
pub const FRAME36: &str = include_str!("../assets/frame36.json");

pub fn parse_topology(text: &str) -> Result<Graph, CliError> {
    Ok(ModelFile::from_json(text)?.graph()?)
}

pub fn load_topology(path: &Path) -> Result<Graph, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_topology(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Damage scenario for the synthetic feature generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ShmScenario {
    pub damaged: BTreeSet<usize>,
    /// Mean shift of damaged nodes, in units of the node's standard deviation.
    pub shift_sigma: f64,
    /// Correlation between the features of nodes joined by a tree edge.
    pub correlation: f64,
    pub intact_samples: usize,
    /// Samples averaged into each node's current mean.
    pub current_samples: usize,
    pub seed: u64,
}

impl Default for ShmScenario {
    fn default() -> Self {
        Self {
            damaged: BTreeSet::from([3, 4]),
            shift_sigma: 2.5,
            correlation: 0.7,
            intact_samples: 300,
            current_samples: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureData {
    pub intact: FeatureTable,
    pub current_means: Vec<f64>,
}

/// Breadth-first spanning forest: visiting order and parent of each node.
fn spanning_forest(g: &Graph) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = g.order();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for u in g.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some(v);
                    queue.push_back(u);
                }
            }
        }
    }
    (order, parent)
}

/// Standardized features: each tree child is `ρ · parent + √(1-ρ²) · ε`, so
/// tree-edge pairs have correlation `ρ` and other pairs `ρ^distance`.
fn correlated_draw(order: &[usize], parent: &[Option<usize>], rho: f64, rng: &mut Rng) -> Vec<f64> {
    let mut z = vec![0.0; parent.len()];
    let s = (1.0 - rho * rho).sqrt();
    for &v in order {
        let e: f64 = rng.sample(StandardNormal);
        z[v] = match parent[v] {
            Some(p) => rho * z[p] + s * e,
            None => e,
        };
    }
    z
}

/// Intact samples and current means for `topology` under `sc`. Every node
/// gets a random baseline mean in [-1, 1] and scale in [0.5, 2]; damaged
/// nodes' current samples are shifted by `shift_sigma` scales.
pub fn synthesize(topology: &Graph, sc: &ShmScenario) -> Result<FeatureData, CliError> {
    let n = topology.order();
    if !(sc.correlation.abs() < 1.0) {
        return Err(CliError::Usage(format!("correlation {} must lie in (-1, 1)", sc.correlation)));
    }
    if let Some(&d) = sc.damaged.iter().find(|&&d| d >= n) {
        return Err(CliError::Usage(format!("damaged node {d} is outside 0..{n}")));
    }
    if sc.current_samples == 0 {
        return Err(CliError::Usage("current sample count must be positive".into()));
    }
    let mut rng = rng_from_seed(derive_seed(sc.seed, 0));
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    let (order, parent) = spanning_forest(topology);

    let mut rng = rng_from_seed(derive_seed(sc.seed, 1));
    let mut columns = vec![Vec::with_capacity(sc.intact_samples); n];
    for _ in 0..sc.intact_samples {
        let z = correlated_draw(&order, &parent, sc.correlation, &mut rng);
        for i in 0..n {
            columns[i].push(mu[i] + sigma[i] * z[i]);
        }
    }

    let mut rng = rng_from_seed(derive_seed(sc.seed, 2));
    let mut sums = vec![0.0; n];
    for _ in 0..sc.current_samples {
        let z = correlated_draw(&order, &parent, sc.correlation, &mut rng);
        for i in 0..n {
            let shift = if sc.damaged.contains(&i) { sc.shift_sigma } else { 0.0 };
            sums[i] += mu[i] + sigma[i] * (z[i] + shift);
        }
    }
    let current_means = sums.iter().map(|s| s / sc.current_samples as f64).collect();
    Ok(FeatureData {
        intact: FeatureTable::new(columns)?,
        current_means,
    })
}

/// Reads a feature CSV with a header row and one column per node.
pub fn read_feature_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let width = rdr.headers()?.len();
    let mut columns = vec![Vec::new(); width];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Data(format!("{}: row {}, column {}: `{field}` is not a number", path.display(), row + 1, col + 1))
            })?;
            columns[col].push(v);
        }
    }
    Ok(columns)
}

#[derive(Debug, Clone)]
pub struct AlgorithmOutcome {
    pub algorithm: Algorithm,
    pub marginals: MarginalSet,
    pub predicted: BTreeSet<usize>,
    pub report: ClassificationReport,
    pub runtime_s: f64,
    /// Mean KL against exact marginals, when those are computable.
    pub mean_kl: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub build: BuildReport,
    /// Model used for inference (edges zeroed for the ablation).
    pub model: IsingModel,
    pub results: Vec<AlgorithmOutcome>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub build: BuildConfig,
    pub algorithms: Vec<Algorithm>,
    pub infer: InferOptions,
    pub threshold: f64,
    pub zero_edges: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            build: BuildConfig::default(),
            algorithms: vec![Algorithm::Ve, Algorithm::Bp, Algorithm::Gibbs],
            infer: InferOptions::default(),
            threshold: 0.5,
            zero_edges: false,
        }
    }
}

/// Runs every requested algorithm on `model` and classifies its nodes.
pub fn classify_model(
    model: &IsingModel,
    damaged: &BTreeSet<usize>,
    cfg: &PipelineConfig,
    params: Option<&GnnParams>,
) -> Result<Vec<AlgorithmOutcome>, CliError> {
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(CliError::Usage(format!("threshold {} must lie in (0, 1)", cfg.threshold)));
    }
    let truth = if ve_feasible(model.graph()) {
        Some(exact_truth(model)?)
    } else {
        None
    };
    let n = model.order();
    let mut results = Vec::with_capacity(cfg.algorithms.len());
    for &alg in &cfg.algorithms {
        let t = Instant::now();
        let marginals = run_inference(alg, model, &cfg.infer, params)?;
        let runtime_s = t.elapsed().as_secs_f64();
        let predicted = classify_nodes(&marginals, cfg.threshold);
        let report = classification_report(&predicted, damaged, n);
        let mean_kl = truth.as_ref().map(|t| mean_node_kl(t, &marginals)).transpose()?;
        results.push(AlgorithmOutcome {
            algorithm: alg,
            marginals,
            predicted,
            report,
            runtime_s,
            mean_kl,
        });
    }
    Ok(results)
}

/// Learns the model, zeroes its edges when `cfg.zero_edges` is set, then
/// runs [`classify_model`].
pub fn run_pipeline(
    topology: &Graph,
    data: &FeatureData,
    damaged: &BTreeSet<usize>,
    cfg: &PipelineConfig,
    params: Option<&GnnParams>,
) -> Result<PipelineOutcome, CliError> {
    let build = build_model(topology, &data.intact, &data.current_means, &cfg.build)?;
    let model = if cfg.zero_edges {
        zero_edges(&build.model)
    } else {
        build.model.clone()
    };
    let results = classify_model(&model, damaged, cfg, params)?;
    Ok(PipelineOutcome { build, model, results })
}
