use std::time::Instant;

use isingnn_core::metrics::mean_node_kl;
use isingnn_core::mrf::average_unique_node_degree;
use isingnn_core::{IsingModel, MarginalSet};
use isingnn_gnn::{load_params, GnnParams};
use rayon::prelude::*;

use crate::algorithms::{run_inference, Algorithm, InferOptions};
use crate::cli::CompareArgs;
use crate::dataset::Dataset;
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};

use super::{infer_options, opt_field, with_pool, write_text};

/// Median of a nonempty slice.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `y` on `x`; `None` without spread in `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `alg` `repeats` times and returns the marginals of the first run
/// with the median wall time in seconds.
pub fn time_inference(
    alg: Algorithm,
    m: &IsingModel,
    opts: &InferOptions,
    params: Option<&GnnParams>,
    repeats: usize,
) -> Result<(MarginalSet, f64), CliError> {
    let mut times = Vec::with_capacity(repeats.max(1));
    let mut first = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let out = run_inference(alg, m, opts, params)?;
        times.push(t.elapsed().as_secs_f64());
        first.get_or_insert(out);
    }
    Ok((first.expect("at least one run"), median(&times)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: usize,
    pub order: usize,
    pub aund: f64,
    pub edges: usize,
    pub algorithm: Algorithm,
    pub runtime_s: Option<f64>,
    pub mean_kl: Option<f64>,
    /// `ok` or the error message of a failed run.
    pub status: String,
}

/// One row per (model, algorithm), in that order. Failures are recorded in
/// the row and do not stop the run.
pub fn compare_models(
    models: &[IsingModel],
    labels: &[Option<MarginalSet>],
    algorithms: &[Algorithm],
    opts: &InferOptions,
    params: Option<&GnnParams>,
    repeats: usize,
) -> Vec<CompareRow> {
    models
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, m)| {
            let aund = average_unique_node_degree(m.graph());
            algorithms.iter().map(move |&alg| {
                let base = CompareRow {
                    model: k,
                    order: m.order(),
                    aund,
                    edges: m.graph().edge_count(),
                    algorithm: alg,
                    runtime_s: None,
                    mean_kl: None,
                    status: "ok".into(),
                };
                match time_inference(alg, m, opts, params, repeats) {
                    Ok((marg, t)) => CompareRow {
                        runtime_s: Some(t),
                        mean_kl: labels
                            .get(k)
                            .and_then(|l| l.as_ref())
                            .and_then(|l| mean_node_kl(l, &marg).ok()),
                        ..base
                    },
                    Err(e) => CompareRow {
                        status: e.to_string(),
                        ..base
                    },
                }
            })
        })
        .collect()
}

/// Per-algorithm aggregates: successful runs, failures, median runtime,
/// mean KL and runtime slope against the average unique node degree.
pub fn summarize(rows: &[CompareRow], alg: Algorithm) -> (usize, usize, Option<f64>, Option<f64>, Option<f64>) {
    let ok: Vec<&CompareRow> = rows.iter().filter(|r| r.algorithm == alg && r.runtime_s.is_some()).collect();
    let failed = rows.iter().filter(|r| r.algorithm == alg && r.runtime_s.is_none()).count();
    if ok.is_empty() {
        return (0, failed, None, None, None);
    }
    let times: Vec<f64> = ok.iter().map(|r| r.runtime_s.unwrap()).collect();
    let kls: Vec<f64> = ok.iter().filter_map(|r| r.mean_kl).collect();
    let mean_kl = (!kls.is_empty()).then(|| kls.iter().sum::<f64>() / kls.len() as f64);
    let aunds: Vec<f64> = ok.iter().map(|r| r.aund).collect();
    (ok.len(), failed, Some(median(&times)), mean_kl, ols_slope(&aunds, &times))
}

pub fn run(a: &CompareArgs, args: &[String]) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("compare", args, a);
    manifest.seeds.push(a.approx.seed);
    manifest.input(&a.dataset);
    if a.algorithms.is_empty() {
        return Err(CliError::Usage("no algorithms requested".into()));
    }
    let opts = infer_options(&a.approx)?;
    let params = match &a.weights {
        Some(p) => {
            manifest.input(p);
            Some(load_params(p)?)
        }
        None if a.algorithms.contains(&Algorithm::Gnn) => {
            return Err(CliError::Usage("the gnn algorithm requires --weights".into()))
        }
        None => None,
    };
    let dataset = Dataset::read(&a.dataset)?;
    let models = dataset.models()?;
    let labels: Vec<Option<MarginalSet>> = dataset.records.iter().map(|r| r.label()).collect();
    let rows = with_pool(a.jobs, || {
        compare_models(&models, &labels, &a.algorithms, &opts, params.as_ref(), a.repeats)
    })?;

    let mut csv = String::from("model,order,aund,edges,algorithm,runtime_s,mean_kl,status\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.model,
            r.order,
            r.aund,
            r.edges,
            r.algorithm,
            opt_field(r.runtime_s),
            opt_field(r.mean_kl),
            csv_escape(&r.status)
        ));
    }
    write_text(&a.out, &csv)?;

    let mut summary = String::from("algorithm,models,failures,median_runtime_s,mean_kl,runtime_slope_per_aund\n");
    println!("# timing: median of {} repetitions per model, {} worker thread(s)", a.repeats.max(1), a.jobs);
    for &alg in &a.algorithms {
        let (n, failed, med, kl, slope) = summarize(&rows, alg);
        let line = format!("{alg},{n},{failed},{},{},{}", opt_field(med), opt_field(kl), opt_field(slope));
        println!("{line}");
        summary.push_str(&line);
        summary.push('\n');
    }
    let mut summary_path = a.out.as_os_str().to_owned();
    summary_path.push(".summary.csv");
    let summary_path = std::path::PathBuf::from(summary_path);
    write_text(&summary_path, &summary)?;
    manifest.output(&a.out);
    manifest.output(&summary_path);
    manifest.finish(&manifest_path(&a.out))?;
    Ok(())
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
