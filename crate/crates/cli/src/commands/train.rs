use std::fmt::Write as _;
use std::path::PathBuf;

use isingnn_gnn::io::params_to_json;
use isingnn_gnn::train::train_with_progress;

use crate::cli::TrainArgs;
use crate::dataset::Dataset;
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};
use crate::synth::samples_from_records;

use super::{gnn_dims, train_config, write_text};

pub fn run(a: &TrainArgs, args: &[String]) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("train", args, a);
    manifest.seeds.push(a.seed);
    manifest.input(&a.dataset);
    let dims = gnn_dims(&a.dims);
    dims.validate()?;
    let cfg = train_config(&a.training, a.seed);
    cfg.validate()?;
    let dataset = Dataset::read(&a.dataset)?;
    let samples = samples_from_records(&dataset.records)?;
    let (params, history) = train_with_progress(&samples, &dims, &cfg, |epoch, loss| {
        log::info!("epoch {} mean loss {loss:.6}", epoch + 1);
    })?;

    write_text(&a.out, &params_to_json(&params))?;
    let history_path = a.history.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".history.csv");
        PathBuf::from(s)
    });
    let mut csv = String::from("epoch,mean_loss\n");
    for (e, l) in history.iter().enumerate() {
        writeln!(csv, "{},{l}", e + 1).expect("writing to a String");
    }
    write_text(&history_path, &csv)?;
    manifest.output(&a.out);
    manifest.output(&history_path);
    manifest.finish(&manifest_path(&a.out))?;
    println!(
        "final mean training loss {}",
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
