use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::AdamState;
use super::{DenseNet, PatchRegressor, PATCH_CELLS};
use crate::error::{Error, Result};
use crate::field::Patch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub l2_penalty: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 1,
            learning_rate: 0.02,
            seed: 0,
            l2_penalty: 0.0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.l2_penalty >= 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate and l2_penalty must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// RMSE in yield units over all labeled cells.
    pub final_train_rmse: f64,
    pub final_val_rmse: f64,
    /// Mean scaled squared error per epoch.
    pub loss_history: Vec<f64>,
}

/// RMSE of `model` over the finite target cells of labeled patches.
pub fn rmse(model: &dyn PatchRegressor, patches: &[Patch]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in patches {
        let target = p
            .target
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("unlabeled patch".into()))?;
        let pred = model.predict(&p.cube)?;
        for (y, t) in pred.iter().zip(target) {
            if t.is_finite() {
                sum += (y - t) * (y - t);
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { (sum / count as f64).sqrt() })
}

/// Mini-batch SGD on mean squared error over the 25 output cells.
pub fn train(net: &mut DenseNet, train_set: &[Patch], val_set: &[Patch], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let encode = |p: &Patch| -> Result<(Vec<f64>, Vec<f64>)> {
        let target = p
            .target
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("patch at {:?} is unlabeled", p.origin)))?;
        if target.len() != PATCH_CELLS {
            return Err(Error::Shape(format!("target has {} cells, expected 25", target.len())));
        }
        Ok((net.encode(&p.cube)?, net.encode_target(target)))
    };
    let samples = train_set.iter().map(encode).collect::<Result<Vec<_>>>()?;
    for p in val_set {
        encode(p)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grads = net.mlp().new_gradients();
    let mut adam = AdamState::new(net.mlp());
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, y) = &samples[i];
                batch_loss += net.mlp().accumulate_gradient(x, y, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, batch {b}; lower the learning rate"
                )));
            }
            epoch_loss += batch_loss;
            let (lr, l2) = (config.learning_rate, config.l2_penalty);
            match config.optimizer {
                Optimizer::Sgd => net.mlp_mut().sgd_step(&mut grads, batch.len(), lr, l2),
                Optimizer::Adam => net.mlp_mut().adam_step(&mut grads, batch.len(), lr, l2, &mut adam),
            }
        }
        if !net.mlp().params_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after epoch {epoch}")));
        }
        let mean = epoch_loss / samples.len() as f64;
        debug!(target: "train", "epoch={epoch} loss={mean:.6e}");
        loss_history.push(mean);
    }

    let final_train_rmse = rmse(net, train_set)?;
    let final_val_rmse = rmse(net, val_set)?;
    info!(target: "train", "epochs={} train_rmse={final_train_rmse:.4} val_rmse={final_val_rmse:.4}", config.epochs);
    Ok(TrainReport {
        final_train_rmse,
        final_val_rmse,
        loss_history,
    })
}
