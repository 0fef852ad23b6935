use std::collections::BTreeMap;
use std::path::Path;

use isingnn_core::approx::GibbsConfig;
use isingnn_core::metrics::ReportRow;
use isingnn_core::mrf::ModelFile;
use isingnn_core::potentials::{BuildConfig, FeatureTable};
use isingnn_core::Graph;
use isingnn_gnn::load_params;
use serde_json::json;

use crate::algorithms::{Algorithm, InferOptions};
use crate::cli::{parse_node_list, ShmDemoArgs};
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};
use crate::shm::{load_topology, parse_topology, read_feature_csv, run_pipeline, synthesize, FeatureData, PipelineConfig, ShmScenario, FRAME36, TRUSS16};

use super::write_text;

fn topology(spec: &str) -> Result<Graph, CliError> {
    match spec {
        "truss16" => parse_topology(TRUSS16),
        "frame36" => parse_topology(FRAME36),
        path => load_topology(Path::new(path)),
    }
}

pub fn run(a: &ShmDemoArgs, args: &[String]) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("shm-demo", args, a);
    manifest.seeds.push(a.seed);
    let g = topology(&a.topology)?;
    let damaged = parse_node_list(&a.damaged)?;
    let data = match (&a.intact_csv, &a.current_csv) {
        (Some(intact), Some(current)) => {
            manifest.input(intact);
            manifest.input(current);
            let columns = read_feature_csv(intact)?;
            let means = FeatureTable::new(read_feature_csv(current)?)?.means();
            FeatureData {
                intact: FeatureTable::new(columns)?,
                current_means: means,
            }
        }
        _ => {
            let sc = ShmScenario {
                damaged: damaged.clone(),
                shift_sigma: a.shift,
                correlation: a.correlation,
                intact_samples: a.intact_samples,
                current_samples: a.current_samples,
                seed: a.seed,
            };
            synthesize(&g, &sc)?
        }
    };
    let params = match &a.weights {
        Some(p) => {
            manifest.input(p);
            Some(load_params(p)?)
        }
        None => None,
    };
    let algorithms = a.algorithms.clone().unwrap_or_else(|| {
        let mut v = vec![Algorithm::Ve, Algorithm::Bp, Algorithm::Gibbs];
        if params.is_some() {
            v.push(Algorithm::Gnn);
        }
        v
    });
    let cfg = PipelineConfig {
        build: BuildConfig {
            k_max: a.k_max,
            mi_samples: a.mi_samples,
            seed: a.seed,
        },
        algorithms,
        infer: InferOptions {
            bp: None,
            gibbs: GibbsConfig {
                burn_in_sweeps: a.burn_in,
                sample_sweeps: a.sweeps,
                seed: a.seed,
            },
        },
        threshold: a.threshold,
        zero_edges: a.zero_edges,
    };
    let out = run_pipeline(&g, &data, &damaged, &cfg, params.as_ref())?;
    for w in &out.build.warnings {
        eprintln!("warning: {w}");
    }

    let mut report = format!("{}\n", ReportRow::CSV_HEADER);
    let mut marginals = BTreeMap::new();
    for r in &out.results {
        let row = ReportRow {
            algorithm: r.algorithm.name().into(),
            case: a.case.clone(),
            fpr: r.report.fpr,
            f1: r.report.f1,
            accuracy: r.report.accuracy,
            runtime_s: r.runtime_s,
            mean_kl: r.mean_kl.unwrap_or(f64::NAN),
        };
        println!("{}", row.to_csv());
        report.push_str(&row.to_csv());
        report.push('\n');
        let rows: Vec<[f64; 2]> = r.marginals.iter().map(|m| m.as_array()).collect();
        marginals.insert(
            r.algorithm.name(),
            json!({ "marginals": rows, "predicted_damaged": r.predicted }),
        );
    }
    let report_path = a.out_dir.join("report.csv");
    let marginals_path = a.out_dir.join("marginals.json");
    let model_path = a.out_dir.join("model.json");
    write_text(&report_path, &report)?;
    let doc = json!({
        "damaged": damaged,
        "zero_edges": a.zero_edges,
        "warnings": out.build.warnings,
        "node_k": out.build.node_k,
        "edge_nmi": out.build.edge_nmi,
        "algorithms": marginals,
    });
    write_text(&marginals_path, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    write_text(&model_path, &(ModelFile::from_model(&out.model).to_json() + "\n"))?;
    for p in [&report_path, &marginals_path, &model_path] {
        manifest.output(p);
    }
    manifest.finish(&manifest_path(&report_path))?;
    Ok(())
}
