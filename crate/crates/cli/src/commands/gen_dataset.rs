use isingnn_core::GraphSpec;

use crate::cli::GenDatasetArgs;
use crate::dataset::{Dataset, DatasetHeader, DATASET_FORMAT, DATASET_VERSION};
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};
use crate::synth::{generate_records, labeler_name};

use super::{with_pool, write_text};

pub fn run(a: &GenDatasetArgs, args: &[String]) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("gen-dataset", args, a);
    manifest.seeds.push(a.seed);
    let spec = GraphSpec::new(a.order, a.aund_lo, a.aund_hi, !a.allow_disconnected)?;
    let labeler = a.label_with.resolve(a.order)?;
    let records = with_pool(a.jobs, || generate_records(&spec, a.count, a.seed, labeler))??;
    let mpath = manifest_path(&a.out);
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        order: a.order,
        aund_lo: a.aund_lo,
        aund_hi: a.aund_hi,
        connected: !a.allow_disconnected,
        count: records.len(),
        seed: a.seed,
        labeler: labeler_name(labeler).into(),
        manifest: mpath
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let dataset = Dataset { header, records };
    write_text(&a.out, &dataset.to_jsonl())?;
    manifest.output(&a.out);
    manifest.finish(&mpath)?;
    println!("wrote {} models to {}", dataset.records.len(), a.out.display());
    Ok(())
}
