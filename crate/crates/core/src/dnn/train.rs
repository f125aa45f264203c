//! Minibatch SGD with softmax cross-entropy.

use ndarray::{s, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::MlpModel;
use crate::data::{Dataset, IMAGE_LEN, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng;

/// Bumped whenever the default recipe changes.
pub const TRAIN_CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub version: u32,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after each epoch.
    pub lr_decay: f64,
    /// L2 penalty coefficient on both weight matrices.
    #[serde(default)]
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            version: TRAIN_CONFIG_VERSION,
            hidden: IMAGE_LEN,
            epochs: 15,
            batch_size: 32,
            learning_rate: 0.1,
            lr_decay: 0.8,
            weight_decay: 2e-4,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning_rate", "must be positive"));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::param("weight_decay", "must be finite and >= 0"));
        }
        if !(self.lr_decay > 0.0) {
            return Err(Error::param("lr_decay", "must be positive"));
        }
        Ok(())
    }
}

/// Trains a `784 -> hidden -> 10` ReLU network. The defaults expect
/// [`crate::data::PixelMap::Centered`] inputs. Deterministic for a given
/// config; zero epochs returns the initialization.
pub fn train_mlp(data: &Dataset, config: &TrainConfig) -> Result<(MlpModel, Vec<EpochStats>)> {
    train_mlp_with(data, config, |_| {})
}

pub fn train_mlp_with(
    data: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(MlpModel, Vec<EpochStats>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    let mut model = MlpModel::init(IMAGE_LEN, config.hidden, NUM_CLASSES, config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = rng::substream(config.seed, 1);
    let mut lr = config.learning_rate;
    let mut history = Vec::with_capacity(config.epochs);

    let bs = config.batch_size;
    let mut batch = Array2::<f64>::zeros((bs, IMAGE_LEN));
    let mut targets = Array2::<f64>::zeros((bs, NUM_CLASSES));

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(bs) {
            let n = idx.len();
            targets.fill(0.0);
            for (row, &i) in idx.iter().enumerate() {
                batch.row_mut(row).assign(&data.images.row(i));
                targets[(row, data.labels[i] as usize)] = 1.0;
            }
            let x = batch.slice(s![..n, ..]);
            let y = targets.slice(s![..n, ..]);

            let (w1, w2) = model.weights_mut();
            let pre = x.dot(&w1.t());
            let hidden = pre.mapv(|v| v.max(0.0));
            let mut probs = hidden.dot(&w2.t());
            for mut row in probs.axis_iter_mut(Axis(0)) {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let total = row.sum();
                row /= total;
            }
            loss_sum -= Zip::from(&probs).and(&y).fold(0.0, |acc, &p, &t| {
                let log_p = if p.is_nan() {
                    f64::NAN
                } else {
                    p.max(1e-300).ln()
                };
                acc + t * log_p
            });

            // d(loss)/d(logits), averaged over the batch
            let mut grad_out = probs;
            grad_out -= &y;
            grad_out /= n as f64;
            let grad_w2 = grad_out.t().dot(&hidden);
            let mut grad_hidden = grad_out.dot(&*w2);
            Zip::from(&mut grad_hidden).and(&pre).for_each(|g, &p| {
                if p <= 0.0 {
                    *g = 0.0
                }
            });
            let grad_w1 = grad_hidden.t().dot(&x);
            if config.weight_decay > 0.0 {
                let shrink = 1.0 - lr * config.weight_decay;
                *w1 *= shrink;
                *w2 *= shrink;
            }
            w2.scaled_add(-lr, &grad_w2);
            w1.scaled_add(-lr, &grad_w1);
        }
        let mean_loss = loss_sum / data.len() as f64;
        let (w1, w2) = model.weights_mut();
        if !mean_loss.is_finite() || w1.iter().chain(w2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: mean_loss,
            });
        }
        let stats = EpochStats {
            epoch,
            mean_loss,
            learning_rate: lr,
        };
        on_epoch(&stats);
        history.push(stats);
        lr *= config.lr_decay;
    }
    model.refresh_rms();
    Ok((model, history))
}
