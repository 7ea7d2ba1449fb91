use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{AeModel, Workspace};
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::series::SubsequenceSet;

/// Samples per gradient work unit; partial sums are reduced in chunk order
/// so results do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps_adam", self.eps_adam),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidConfig("Adam betas must lie in (0, 1)".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Anything that can hand out fixed-length training windows by index.
pub trait WindowSource: Sync {
    fn count(&self) -> usize;
    fn dim(&self) -> usize;
    fn copy_into(&self, i: usize, out: &mut [f64]);
}

impl WindowSource for SubsequenceSet<'_> {
    fn count(&self) -> usize {
        self.len()
    }

    fn dim(&self) -> usize {
        self.source().nc() * self.m()
    }

    fn copy_into(&self, i: usize, out: &mut [f64]) {
        self.copy_window(i, out);
    }
}

/// Windows stored back to back in one buffer.
#[derive(Debug, Clone, Copy)]
pub struct FlatWindows<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl WindowSource for FlatWindows<'_> {
    fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn copy_into(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[i * self.dim..(i + 1) * self.dim]);
    }
}

impl<W: WindowSource> WindowSource for &W {
    fn count(&self) -> usize {
        (**self).count()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn copy_into(&self, i: usize, out: &mut [f64]) {
        (**self).copy_into(i, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub history: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.history.last().map(|e| e.train_loss)
    }
}

/// Seeded shuffled split into (train, validation) index sets.
pub fn split_indices(count: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_val = ((count as f64 * val_fraction).round() as usize).clamp(1, count - 1);
    let val = idx.split_off(count - n_val);
    (idx, val)
}

/// Mean per-window reconstruction MSE over `indices`.
pub fn mean_loss<W: WindowSource>(model: &AeModel, windows: &W, indices: &[usize]) -> f64 {
    let parts: Vec<f64> = indices
        .par_chunks(GRAD_CHUNK)
        .map_init(
            || Workspace::new(&model.arch),
            |ws, chunk| {
                chunk
                    .iter()
                    .map(|&i| {
                        windows.copy_into(i, ws.input_mut());
                        ws.forward(&model.params, &model.arch)
                    })
                    .sum::<f64>()
            },
        )
        .collect();
    parts.iter().sum::<f64>() / indices.len() as f64
}

/// Mean loss over `batch` and the gradient of that mean.
fn batch_gradient<W: WindowSource>(model: &AeModel, windows: &W, batch: &[usize], grad: &mut [f64]) -> f64 {
    let scale = 1.0 / batch.len() as f64;
    let n = model.params.len();
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(GRAD_CHUNK)
        .map_init(
            || Workspace::new(&model.arch),
            |ws, chunk| {
                let mut g = vec![0.0; n];
                let mut loss = 0.0;
                for &i in chunk {
                    windows.copy_into(i, ws.input_mut());
                    loss += ws.forward(&model.params, &model.arch);
                    ws.backward(&model.params, &model.arch, scale, &mut g);
                }
                (loss, g)
            },
        )
        .collect();
    grad.fill(0.0);
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    loss * scale
}

/// Mini-batch Adam on reconstruction MSE with a seeded validation split.
///
/// The model ends with the parameters of the best validation epoch.
pub fn train<W: WindowSource>(model: &mut AeModel, windows: &W, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let count = windows.count();
    if count < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 windows, got {count}"
        )));
    }
    if windows.dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "windows have {} values, the model expects {}",
            windows.dim(),
            model.input_dim()
        )));
    }
    let (mut train_idx, val_idx) = split_indices(count, cfg.val_fraction, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05ee_d0fb_a7c4);
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam);
    let mut grad = vec![0.0; model.params.len()];

    let initial_val_loss = mean_loss(model, windows, &val_idx);
    let mut best = initial_val_loss;
    let mut best_params = model.params.clone();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let loss = batch_gradient(model, windows, batch, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Internal(format!("non-finite training loss at epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            adam.step(&mut model.params, &grad);
        }
        let train_loss = total / train_idx.len() as f64;
        let val_loss = mean_loss(model, windows, &val_idx);
        if !val_loss.is_finite() {
            return Err(Error::Internal(format!("non-finite validation loss at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e}");
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best {
            best = val_loss;
            best_params.copy_from_slice(&model.params);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    model.params = best_params;
    model.trained_epochs += history.len();
    model.best_val_loss = Some(best);
    model.seed = cfg.seed;
    Ok(TrainReport {
        initial_val_loss,
        best_val_loss: best,
        best_epoch,
        epochs_run: history.len(),
        n_train: train_idx.len(),
        n_val: val_idx.len(),
        history,
    })
}
