//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::algorithms::Algorithm;
use crate::error::CliError;
use crate::synth::LabelWith;

#[derive(Debug, Parser)]
#[command(name = "isingnn", version, about = "Ising-model inference benchmarks", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a JSON-lines dataset of random models with exact labels.
    GenDataset(GenDatasetArgs),
    /// Train a GNN on a labeled dataset.
    Train(TrainArgs),
    /// Compute marginals of one model file.
    Infer(InferArgs),
    /// Train-and-test grid over sample count, degree or order.
    Sweep(SweepArgs),
    /// Time and score algorithms on a dataset.
    Compare(CompareArgs),
    /// Synthetic monitoring scenario: learn a model, infer, classify.
    ShmDemo(ShmDemoArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

/// Closed degree interval written `lo-hi` (or `lo~hi`, or a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AundRange {
    pub lo: f64,
    pub hi: f64,
}

impl std::str::FromStr for AundRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a degree range"));
        let (lo, hi) = match s.split_once(['-', '~']) {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("degree range `{s}` is empty"));
        }
        Ok(Self { lo, hi })
    }
}

impl std::fmt::Display for AundRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub order: usize,
    #[arg(long, default_value_t = 2.0)]
    pub aund_lo: f64,
    #[arg(long, default_value_t = 3.0)]
    pub aund_hi: f64,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Labeler; `auto` refuses orders above 25.
    #[arg(long, value_enum, default_value_t = LabelWith::Auto)]
    pub label_with: LabelWith,
    #[arg(long)]
    pub allow_disconnected: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DimsArgs {
    /// Hidden state size P.
    #[arg(long, default_value_t = 5)]
    pub hidden: usize,
    /// Message size Q.
    #[arg(long, default_value_t = 5)]
    pub message: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub message_layers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub readout_layers: Vec<usize>,
    /// Message-passing steps T.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Weight file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV (default `<out>.history.csv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub dims: DimsArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ApproxArgs {
    /// Seed of the Gibbs chain.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InferArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Set every edge coupling to zero before inference.
    #[arg(long)]
    pub zero_edges: bool,
    /// Marginals JSON to write (stdout only when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub approx: ApproxArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Samples,
    Degree,
    Order,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// Training-set sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub train_order: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub test_orders: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub train_aunds: Option<Vec<AundRange>>,
    #[arg(long, value_delimiter = ',')]
    pub test_aunds: Option<Vec<AundRange>>,
    #[arg(long, default_value_t = 200)]
    pub test_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000)]
    pub gibbs_burn_in: usize,
    #[arg(long, default_value_t = 10_000)]
    pub gibbs_sweeps: usize,
    /// Gibbs sweeps of the surrogate truth used when elimination is infeasible.
    #[arg(long, default_value_t = 1_000_000)]
    pub surrogate_sweeps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for the weights of every trained network.
    #[arg(long)]
    pub weights_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub dims: DimsArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gnn,gibbs,bp")]
    pub algorithms: Vec<Algorithm>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Timed repetitions per model and algorithm; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub approx: ApproxArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShmDemoArgs {
    /// `truss16`, `frame36` or a topology JSON file.
    #[arg(long, default_value = "truss16")]
    pub topology: String,
    /// Damaged nodes, comma separated (`none` for an intact structure).
    #[arg(long, default_value = "3,4")]
    pub damaged: String,
    /// Mean shift of damaged nodes in standard deviations.
    #[arg(long, default_value_t = 2.5)]
    pub shift: f64,
    #[arg(long, default_value_t = 0.7)]
    pub correlation: f64,
    #[arg(long, default_value_t = 300)]
    pub intact_samples: usize,
    #[arg(long, default_value_t = 30)]
    pub current_samples: usize,
    /// Intact feature CSV (header row, one column per node) replacing the
    /// synthetic data.
    #[arg(long, requires = "current_csv")]
    pub intact_csv: Option<PathBuf>,
    /// Current-state feature CSV; column means are the current means.
    #[arg(long, requires = "intact_csv")]
    pub current_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub zero_edges: bool,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mi_samples: usize,
    /// Label of the `case` column.
    #[arg(long, default_value = "synthetic")]
    pub case: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Parses a damaged-node list such as `3,4` or `none`.
pub fn parse_node_list(s: &str) -> Result<std::collections::BTreeSet<usize>, CliError> {
    let t = s.trim();
    if t.is_empty() || t == "none" {
        return Ok(Default::default());
    }
    t.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("`{p}` is not a node index")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_ranges() {
        assert_eq!("2-3".parse::<AundRange>().unwrap(), AundRange { lo: 2.0, hi: 3.0 });
        assert_eq!("5~6".parse::<AundRange>().unwrap(), AundRange { lo: 5.0, hi: 6.0 });
        assert_eq!("2.5".parse::<AundRange>().unwrap(), AundRange { lo: 2.5, hi: 2.5 });
        assert!("3-2".parse::<AundRange>().is_err());
        assert!("a-b".parse::<AundRange>().is_err());
        assert_eq!(AundRange { lo: 2.0, hi: 3.0 }.to_string(), "2-3");
    }

    #[test]
    fn node_lists() {
        assert_eq!(parse_node_list("3, 4").unwrap().into_iter().collect::<Vec<_>>(), vec![3, 4]);
        assert!(parse_node_list("none").unwrap().is_empty());
        assert!(parse_node_list("").unwrap().is_empty());
        assert!(parse_node_list("x").is_err());
    }

    #[test]
    fn later_flags_override_earlier() {
        let cli = Cli::try_parse_from(["isingnn", "gen-dataset", "--order", "5", "--out", "a", "--order", "7"]).unwrap();
        match cli.command {
            Command::GenDataset(a) => assert_eq!(a.order, 7),
            _ => unreachable!(),
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
