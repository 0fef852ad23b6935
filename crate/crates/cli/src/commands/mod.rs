//! Subcommand implementations.

mod compare;
mod gen_dataset;
mod infer;
mod shm_demo;
mod sweep;
mod train;

use std::io::Write;
use std::path::Path;

use isingnn_core::approx::{BpConfig, GibbsConfig};
use isingnn_gnn::{GnnDims, TrainConfig};

use crate::algorithms::InferOptions;
use crate::cli::{ApproxArgs, Command, DimsArgs, TrainingArgs};
use crate::error::CliError;

pub use compare::{compare_models, median, ols_slope, summarize, time_inference, CompareRow};
pub use sweep::{evaluate, EvalRow, TestSet, TruthKind};

/// Runs `cmd`; `args` is the resolved argument list recorded in manifests.
pub fn dispatch(cmd: Command, args: &[String]) -> Result<(), CliError> {
    match cmd {
        Command::GenDataset(a) => gen_dataset::run(&a, args),
        Command::Train(a) => train::run(&a, args),
        Command::Infer(a) => infer::run(&a, args),
        Command::Sweep(a) => sweep::run(&a, args),
        Command::Compare(a) => compare::run(&a, args),
        Command::ShmDemo(a) => shm_demo::run(&a, args),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

/// Runs `f` on a rayon pool with `jobs` threads (0 = all cores).
pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Algorithm(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn gnn_dims(a: &DimsArgs) -> GnnDims {
    GnnDims {
        hidden: a.hidden,
        message: a.message,
        message_layers: a.message_layers.clone(),
        readout_layers: a.readout_layers.clone(),
        steps: a.steps,
    }
}

pub(crate) fn train_config(a: &TrainingArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed,
        shuffle: !a.no_shuffle,
    }
}

pub(crate) fn infer_options(a: &ApproxArgs) -> Result<InferOptions, CliError> {
    let bp = if a.tolerance.is_some() || a.max_iterations.is_some() || a.damping.is_some() {
        let d = BpConfig::default();
        let cfg = BpConfig {
            tolerance: a.tolerance.unwrap_or(d.tolerance),
            max_iterations: a.max_iterations.unwrap_or(d.max_iterations),
            damping: a.damping.unwrap_or(d.damping),
        };
        if !(cfg.tolerance > 0.0) || cfg.max_iterations == 0 || !(0.0..1.0).contains(&cfg.damping) {
            return Err(CliError::Usage(format!(
                "belief propagation needs tolerance > 0, max iterations > 0 and damping in [0, 1); got {}, {}, {}",
                cfg.tolerance, cfg.max_iterations, cfg.damping
            )));
        }
        Some(cfg)
    } else {
        None
    };
    if a.sweeps == 0 {
        return Err(CliError::Usage("--sweeps must be positive".into()));
    }
    Ok(InferOptions {
        bp,
        gibbs: GibbsConfig {
            burn_in_sweeps: a.burn_in,
            sample_sweeps: a.sweeps,
            seed: a.seed,
        },
    })
}

/// Writes `text` to `path`, creating parent directories.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Optional float as a CSV field (empty when absent).
pub(crate) fn opt_field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
