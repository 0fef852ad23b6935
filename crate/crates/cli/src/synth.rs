//! Random labeled model sets.

use clap::ValueEnum;
use isingnn_core::exact::{BRUTE_FORCE_LABEL_ORDER, MAX_ENUMERATION_ORDER};
use isingnn_core::mrf::{generate_graph, sample_model};
use isingnn_core::rng::derive_seed;
use isingnn_core::{GraphSpec, IsingModel, MarginalSet};
use isingnn_gnn::LabeledSample;
use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{run_inference, Algorithm, InferOptions};
use crate::dataset::DatasetRecord;
use crate::error::CliError;

/// Model `index` of a set drawn with `seed`: its own seed, graph and
/// parameters.
pub fn model_seed(seed: u64, index: u64) -> u64 {
    derive_seed(seed, index)
}

/// Random graph from `spec` and random parameters, both derived from
/// `seed`.
pub fn random_model(spec: &GraphSpec, seed: u64) -> Result<IsingModel, CliError> {
    let g = generate_graph(spec, derive_seed(seed, 0))?;
    Ok(sample_model(&g, derive_seed(seed, 1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelWith {
    /// Enumeration up to 16 nodes, elimination up to 25, refused above.
    Auto,
    Brute,
    Ve,
    None,
}

impl LabelWith {
    /// Labeler actually used for models of order `n`.
    pub fn resolve(self, n: usize) -> Result<Option<Algorithm>, CliError> {
        match self {
            LabelWith::Auto if n <= BRUTE_FORCE_LABEL_ORDER => Ok(Some(Algorithm::Brute)),
            LabelWith::Auto if n <= MAX_ENUMERATION_ORDER => Ok(Some(Algorithm::Ve)),
            LabelWith::Auto => Err(CliError::Usage(format!(
                "exact labels for order {n} > {MAX_ENUMERATION_ORDER} require --label-with ve"
            ))),
            LabelWith::Brute => Ok(Some(Algorithm::Brute)),
            LabelWith::Ve => Ok(Some(Algorithm::Ve)),
            LabelWith::None => Ok(None),
        }
    }
}

pub fn labeler_name(alg: Option<Algorithm>) -> &'static str {
    alg.map_or("none", Algorithm::name)
}

/// `count` models from `spec` with optional exact labels, generated in
/// parallel on the current rayon pool; record order follows the index.
pub fn generate_records(
    spec: &GraphSpec,
    count: usize,
    seed: u64,
    labeler: Option<Algorithm>,
) -> Result<Vec<DatasetRecord>, CliError> {
    let name = labeler_name(labeler);
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = model_seed(seed, i);
            let m = random_model(spec, s)?;
            let label = match labeler {
                Some(alg) => Some(run_inference(alg, &m, &InferOptions::default(), None)?),
                None => None,
            };
            Ok(DatasetRecord::new(&m, label.as_ref(), s, name))
        })
        .collect()
}

/// Exactly labeled training or test samples.
pub fn labeled_samples(spec: &GraphSpec, count: usize, seed: u64) -> Result<Vec<LabeledSample>, CliError> {
    let labeler = LabelWith::Auto.resolve(spec.order).or_else(|_| LabelWith::Ve.resolve(spec.order))?;
    generate_records(spec, count, seed, labeler)?
        .iter()
        .map(|r| {
            Ok(LabeledSample {
                model: r.model()?,
                label: r.label().expect("labeled record"),
            })
        })
        .collect()
}

/// Converts labeled records into training samples.
pub fn samples_from_records(records: &[DatasetRecord]) -> Result<Vec<LabeledSample>, CliError> {
    records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let label: MarginalSet = r
                .label()
                .ok_or_else(|| CliError::Data(format!("record {k} has no label marginals")))?;
            Ok(LabeledSample { model: r.model()?, label })
        })
        .collect()
}
