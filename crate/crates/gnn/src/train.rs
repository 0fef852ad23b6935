//! Minibatch ADAM training on labeled models.

use isingnn_core::rng::{derive_seed, rng_from_seed};
use rand::seq::SliceRandom;

use crate::model::{loss_and_gradient, GnnDims, GnnParams, LabeledSample};
use crate::nn::{AdamConfig, AdamState};
use crate::GnnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(GnnError::InvalidConfig(format!(
                "learning rate {}, epochs {}, batch size {}",
                self.learning_rate, self.epochs, self.batch_size
            )));
        }
        Ok(())
    }
}

/// Trains from freshly initialized parameters and returns them with the
/// mean training loss of every epoch.
pub fn train(data: &[LabeledSample], dims: &GnnDims, cfg: &TrainConfig) -> Result<(GnnParams, Vec<f64>), GnnError> {
    train_with_progress(data, dims, cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each
/// epoch.
pub fn train_with_progress<F>(
    data: &[LabeledSample],
    dims: &GnnDims,
    cfg: &TrainConfig,
    mut progress: F,
) -> Result<(GnnParams, Vec<f64>), GnnError>
where
    F: FnMut(usize, f64),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    let mut params = GnnParams::init(dims, derive_seed(cfg.seed, 0))?;
    let mut flat = params.to_flat();
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(flat.len(), adam_cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, 1));
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&LabeledSample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = loss_and_gradient(&params, &batch);
            total += loss * batch.len() as f64;
            adam.update(&mut flat, &grad.to_flat());
            params.set_flat(&flat);
        }
        let mean = total / data.len() as f64;
        log::debug!("epoch {epoch}: loss {mean}");
        progress(epoch, mean);
        history.push(mean);
    }
    Ok((params, history))
}
