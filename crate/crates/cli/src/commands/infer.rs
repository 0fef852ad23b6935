use std::time::Instant;

use isingnn_core::mrf::{zero_edges, ModelFile};
use isingnn_gnn::load_params;
use serde_json::json;

use crate::algorithms::{run_inference, Algorithm};
use crate::cli::InferArgs;
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};

use super::{infer_options, write_text};

pub fn run(a: &InferArgs, args: &[String]) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("infer", args, a);
    manifest.seeds.push(a.approx.seed);
    manifest.input(&a.model);
    let opts = infer_options(&a.approx)?;
    let params = match (&a.weights, a.algorithm) {
        (Some(p), Algorithm::Gnn) => {
            manifest.input(p);
            Some(load_params(p)?)
        }
        (None, Algorithm::Gnn) => return Err(CliError::Usage("the gnn algorithm requires --weights".into())),
        _ => None,
    };
    let text = std::fs::read_to_string(&a.model).map_err(|e| CliError::io(&a.model, e))?;
    let mut model = ModelFile::from_json(&text)
        .and_then(|f| f.model())
        .map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    if a.zero_edges {
        model = zero_edges(&model);
    }
    let t = Instant::now();
    let marginals = run_inference(a.algorithm, &model, &opts, params.as_ref())?;
    let runtime_s = t.elapsed().as_secs_f64();
    let rows: Vec<[f64; 2]> = marginals.iter().map(|m| m.as_array()).collect();
    let result = json!({
        "algorithm": a.algorithm.name(),
        "n": model.order(),
        "zero_edges": a.zero_edges,
        "marginals": rows,
    });
    if let Some(out) = &a.out {
        write_text(out, &(serde_json::to_string_pretty(&result)? + "\n"))?;
        manifest.output(out);
        manifest.finish(&manifest_path(out))?;
    }
    let mut printed = result;
    printed["runtime_s"] = json!(runtime_s);
    println!("{}", serde_json::to_string_pretty(&printed)?);
    Ok(())
}
