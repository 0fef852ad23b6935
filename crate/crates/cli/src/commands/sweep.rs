use std::collections::HashMap;

use isingnn_core::approx::{gibbs_marginals, GibbsConfig};
use isingnn_core::metrics::{mean_node_kl, regression_metrics, RegressionMetrics};
use isingnn_core::rng::derive_seed;
use isingnn_core::{GraphSpec, IsingModel, MarginalSet};
use isingnn_gnn::io::params_to_json;
use isingnn_gnn::train::train_with_progress;
use isingnn_gnn::GnnParams;
use rayon::prelude::*;

use crate::algorithms::{exact_truth, run_inference, ve_feasible, Algorithm, InferOptions};
use crate::cli::{AundRange, SweepArgs, SweepKind};
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};
use crate::synth::{labeled_samples, model_seed, random_model};

use super::{gnn_dims, opt_field, train_config, with_pool, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthKind {
    Exact,
    /// Long Gibbs run standing in for exact marginals; KL is not reported.
    GibbsSurrogate,
}

impl TruthKind {
    pub fn name(self) -> &'static str {
        match self {
            TruthKind::Exact => "exact",
            TruthKind::GibbsSurrogate => "gibbs-surrogate",
        }
    }
}

/// Held-out models with reference marginals.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub models: Vec<IsingModel>,
    pub truth: Vec<MarginalSet>,
    pub kind: TruthKind,
    pub seed: u64,
}

impl TestSet {
    /// Exact truth when elimination is feasible on every model, otherwise a
    /// Gibbs surrogate with `surrogate_sweeps` retained sweeps.
    pub fn generate(spec: &GraphSpec, count: usize, seed: u64, surrogate_sweeps: usize) -> Result<Self, CliError> {
        let models: Vec<IsingModel> = (0..count as u64)
            .into_par_iter()
            .map(|i| random_model(spec, model_seed(seed, i)))
            .collect::<Result<_, _>>()?;
        let exact = models.iter().all(|m| ve_feasible(m.graph()));
        let truth = models
            .par_iter()
            .enumerate()
            .map(|(k, m)| {
                if exact {
                    exact_truth(m)
                } else {
                    let cfg = GibbsConfig {
                        burn_in_sweeps: surrogate_sweeps / 10,
                        sample_sweeps: surrogate_sweeps,
                        seed: derive_seed(seed, 1_000_000 + k as u64),
                    };
                    Ok(gibbs_marginals(m, &cfg))
                }
            })
            .collect::<Result<_, _>>()?;
        let kind = if exact { TruthKind::Exact } else { TruthKind::GibbsSurrogate };
        Ok(Self { models, truth, kind, seed })
    }
}

/// Accuracy of one algorithm on a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub algorithm: Algorithm,
    pub truth: TruthKind,
    /// Mean over models of the mean node KL; only against exact truth.
    pub mean_kl: Option<f64>,
    /// Regression metrics over the flattened `p(θ = +1)` values.
    pub metrics: Option<RegressionMetrics>,
}

/// Runs every algorithm on every test model. The Gibbs seed of model `k`
/// is derived from `opts.gibbs.seed` and `k`.
pub fn evaluate(
    test: &TestSet,
    algorithms: &[Algorithm],
    opts: &InferOptions,
    params: Option<&GnnParams>,
) -> Result<Vec<EvalRow>, CliError> {
    let truth_flat: Vec<f64> = test.truth.iter().flat_map(|t| t.p_plus()).collect();
    algorithms
        .iter()
        .map(|&alg| {
            let preds: Vec<MarginalSet> = test
                .models
                .par_iter()
                .enumerate()
                .map(|(k, m)| {
                    let mut o = *opts;
                    o.gibbs.seed = derive_seed(opts.gibbs.seed, k as u64);
                    run_inference(alg, m, &o, params)
                })
                .collect::<Result<_, _>>()?;
            let mean_kl = match test.kind {
                TruthKind::Exact => {
                    let mut s = 0.0;
                    for (t, p) in test.truth.iter().zip(&preds) {
                        s += mean_node_kl(t, p)?;
                    }
                    Some(s / preds.len().max(1) as f64)
                }
                TruthKind::GibbsSurrogate => None,
            };
            let pred_flat: Vec<f64> = preds.iter().flat_map(|p| p.p_plus()).collect();
            Ok(EvalRow {
                algorithm: alg,
                truth: test.kind,
                mean_kl,
                metrics: regression_metrics(&truth_flat, &pred_flat).ok(),
            })
        })
        .collect()
}

struct Grid {
    sizes: Vec<usize>,
    train_order: usize,
    test_orders: Vec<usize>,
    train_aunds: Vec<AundRange>,
    test_aunds: Vec<AundRange>,
}

fn grid(a: &SweepArgs) -> Grid {
    let r = |lo, hi| AundRange { lo, hi };
    let (sizes, order, train_aunds, test_aunds) = match a.kind {
        SweepKind::Samples => (vec![100, 300, 1000, 3000], 10, vec![r(2.0, 3.0)], vec![r(2.0, 3.0)]),
        SweepKind::Degree => (vec![1000], 10, vec![r(2.0, 3.0), r(5.0, 6.0)], vec![r(2.0, 3.0), r(5.0, 6.0)]),
        SweepKind::Order => (vec![1000], 9, vec![r(2.0, 3.0)], vec![r(2.0, 3.0)]),
    };
    let train_order = a.train_order.unwrap_or(order);
    let default_tests = match a.kind {
        SweepKind::Order => vec![9, 16, 36],
        _ => vec![train_order],
    };
    Grid {
        sizes: a.sizes.clone().unwrap_or(sizes),
        train_order,
        test_orders: a.test_orders.clone().unwrap_or(default_tests),
        train_aunds: a.train_aunds.clone().unwrap_or(train_aunds),
        test_aunds: a.test_aunds.clone().unwrap_or(test_aunds),
    }
}

const HEADER: &str = "kind,train_count,train_order,train_aund,test_order,test_aund,test_count,algorithm,truth,mean_kl,r2,mae,mse,rmse,train_seed,test_seed";

pub fn run(a: &SweepArgs, args: &[String]) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("sweep", args, a);
    manifest.seeds.push(a.seed);
    let g = grid(a);
    if g.sizes.is_empty() || g.test_orders.is_empty() || g.train_aunds.is_empty() || g.test_aunds.is_empty() {
        return Err(CliError::Usage("sweep grid has an empty axis".into()));
    }
    let dims = gnn_dims(&a.dims);
    dims.validate()?;
    let cfg = train_config(&a.training, a.seed);
    cfg.validate()?;
    if let Some(dir) = &a.weights_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }

    write_text(&a.out, &format!("{HEADER}\n"))?;
    let file = std::fs::OpenOptions::new()
        .append(true)
        .open(&a.out)
        .map_err(|e| CliError::io(&a.out, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let opts = InferOptions {
        bp: None,
        gibbs: GibbsConfig {
            burn_in_sweeps: a.gibbs_burn_in,
            sample_sweeps: a.gibbs_sweeps,
            seed: derive_seed(a.seed, 3),
        },
    };
    let kind = match a.kind {
        SweepKind::Samples => "samples",
        SweepKind::Degree => "degree",
        SweepKind::Order => "order",
    };
    let max_size = *g.sizes.iter().max().expect("nonempty");
    let mut tests: HashMap<(usize, usize), TestSet> = HashMap::new();

    with_pool(a.jobs, || -> Result<(), CliError> {
        for (ti, tr) in g.train_aunds.iter().enumerate() {
            let spec = GraphSpec::connected(g.train_order, tr.lo, tr.hi)?;
            let train_seed = derive_seed(a.seed, 1 + ti as u64);
            log::info!("labeling {max_size} training models, order {}, degree {tr}", g.train_order);
            let all = labeled_samples(&spec, max_size, train_seed)?;
            for &size in &g.sizes {
                log::info!("training on {size} models");
                let (params, _) = train_with_progress(&all[..size], &dims, &cfg, |e, l| {
                    log::debug!("epoch {} loss {l:.6}", e + 1)
                })?;
                if let Some(dir) = &a.weights_dir {
                    let p = dir.join(format!("gnn_order{}_aund{tr}_n{size}.json", g.train_order));
                    write_text(&p, &params_to_json(&params))?;
                }
                for &order in &g.test_orders {
                    for (ei, te) in g.test_aunds.iter().enumerate() {
                        let test_seed = derive_seed(a.seed, 1_000 + 100 * order as u64 + ei as u64);
                        if !tests.contains_key(&(order, ei)) {
                            let spec = GraphSpec::connected(order, te.lo, te.hi)?;
                            let t = TestSet::generate(&spec, a.test_count, test_seed, a.surrogate_sweeps)?;
                            tests.insert((order, ei), t);
                        }
                        let test = &tests[&(order, ei)];
                        let rows = evaluate(test, &[Algorithm::Gnn, Algorithm::Bp, Algorithm::Gibbs], &opts, Some(&params))?;
                        for r in rows {
                            let m = r.metrics.as_ref();
                            w.write_record([
                                kind.to_string(),
                                size.to_string(),
                                g.train_order.to_string(),
                                tr.to_string(),
                                order.to_string(),
                                te.to_string(),
                                a.test_count.to_string(),
                                r.algorithm.name().to_string(),
                                r.truth.name().to_string(),
                                opt_field(r.mean_kl),
                                opt_field(m.map(|m| m.r2)),
                                opt_field(m.map(|m| m.mae)),
                                opt_field(m.map(|m| m.mse)),
                                opt_field(m.map(|m| m.rmse)),
                                train_seed.to_string(),
                                test_seed.to_string(),
                            ])?;
                            w.flush()?;
                        }
                    }
                }
            }
        }
        Ok(())
    })??;

    manifest.output(&a.out);
    if let Some(dir) = &a.weights_dir {
        manifest.output(dir);
    }
    manifest.finish(&manifest_path(&a.out))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
