//! Adam training loop with learning-rate decay, validation-based
//! checkpointing, and optional periodic regeneration of the training pool.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::{Layer, LayerGrads};
use super::NetworkModel;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::systems::PairedDataset;

/// Learning-rate decay policy.
///
/// The per-step harmonic form collapses the rate within a few hundred mini
/// batches and stalls long before the estimators it is compared against;
/// per-epoch exponential decay (1% per epoch) anneals to zero over the
/// hundreds-of-epochs horizons used here and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecaySchedule {
    /// lr_t = lr / (1 + rate * step).
    PerStep { rate: f64 },
    /// lr_e = lr / (1 + rate * epoch).
    PerEpochHarmonic { rate: f64 },
    /// lr_e = lr * (1 - rate)^epoch.
    PerEpochExponential { rate: f64 },
}

impl Default for DecaySchedule {
    fn default() -> Self {
        DecaySchedule::PerEpochExponential { rate: 0.01 }
    }
}

impl DecaySchedule {
    fn rate_at(&self, base: f64, epoch: usize, step: u64) -> f64 {
        match self {
            DecaySchedule::PerStep { rate } => base / (1.0 + rate * step as f64),
            DecaySchedule::PerEpochHarmonic { rate } => base / (1.0 + rate * epoch as f64),
            DecaySchedule::PerEpochExponential { rate } => base * (1.0 - rate).powi(epoch as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default)]
    pub decay: DecaySchedule,
    pub max_epochs: usize,
    #[serde(default = "default_val_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub regenerate_every: Option<usize>,
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_val_fraction() -> f64 {
    0.1
}

impl TrainingConfig {
    pub fn new(learning_rate: f64, batch_size: usize, max_epochs: usize, seed: u64) -> Self {
        TrainingConfig {
            learning_rate,
            batch_size,
            beta1: default_beta1(),
            beta2: default_beta2(),
            decay: DecaySchedule::default(),
            max_epochs,
            validation_fraction: default_val_fraction(),
            regenerate_every: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-6..=1e-3).contains(&self.learning_rate) {
            return Err(Error::domain(format!(
                "learning rate must lie in [1e-6, 1e-3], got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 64 {
            return Err(Error::domain("batch size must be at least 64"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(Error::domain("validation fraction must lie in (0, 0.5)"));
        }
        if let Some(r) = self.regenerate_every {
            if r == 0 {
                return Err(Error::domain("regeneration cadence must be positive"));
            }
        }
        Ok(())
    }
}

/// One line of the per-epoch training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Training outcome: the best-validation snapshot plus the full log.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: NetworkModel,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Source of fresh training pools for periodic regeneration; receives the
/// 1-based regeneration ordinal and returns the new pool.
pub type Regenerator<'a> = &'a mut dyn FnMut(u64) -> Result<PairedDataset>;

struct Adam {
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(model: &NetworkModel, beta1: f64, beta2: f64) -> Self {
        let zeros = |layer: &Layer| match layer {
            Layer::Dense(d) => LayerGrads::Dense {
                w: Array2::zeros(d.w.dim()),
                b: Array1::zeros(d.b.len()),
            },
            Layer::Batchnorm(bn) => LayerGrads::Batchnorm {
                gamma: Array1::zeros(bn.gamma.len()),
                beta: Array1::zeros(bn.beta.len()),
            },
            _ => LayerGrads::None,
        };
        Adam {
            m: model.layers.iter().map(zeros).collect(),
            v: model.layers.iter().map(zeros).collect(),
            t: 0,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }

    fn step(&mut self, model: &mut NetworkModel, grads: &[LayerGrads], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((layer, grad), (m, v)) in model
            .layers
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            match (layer, grad, m, v) {
                (
                    Layer::Dense(d),
                    LayerGrads::Dense { w: gw, b: gb },
                    LayerGrads::Dense { w: mw, b: mb },
                    LayerGrads::Dense { w: vw, b: vb },
                ) => {
                    adam_update_2d(&mut d.w, gw, mw, vw, lr, self.beta1, self.beta2, bc1, bc2, self.eps);
                    adam_update_1d(&mut d.b, gb, mb, vb, lr, self.beta1, self.beta2, bc1, bc2, self.eps);
                }
                (
                    Layer::Batchnorm(bn),
                    LayerGrads::Batchnorm { gamma: gg, beta: gb },
                    LayerGrads::Batchnorm { gamma: mg, beta: mb },
                    LayerGrads::Batchnorm { gamma: vg, beta: vb },
                ) => {
                    adam_update_1d(&mut bn.gamma, gg, mg, vg, lr, self.beta1, self.beta2, bc1, bc2, self.eps);
                    adam_update_1d(&mut bn.beta, gb, mb, vb, lr, self.beta1, self.beta2, bc1, bc2, self.eps);
                }
                _ => {}
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update_2d(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    bc1: f64,
    bc2: f64,
    eps: f64,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        });
}

#[allow(clippy::too_many_arguments)]
fn adam_update_1d(
    p: &mut Array1<f64>,
    g: &Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    bc1: f64,
    bc2: f64,
    eps: f64,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        });
}

/// Trains the model on the dataset's (Y -> X) pairs.
///
/// A validation slice is held out up front and never regenerated; the
/// returned snapshot is the epoch with the lowest validation loss. With
/// `regenerate_every` set, the training pool is replaced from the
/// regenerator on that epoch cadence.
pub fn train(
    mut model: NetworkModel,
    train_set: &PairedDataset,
    config: &TrainingConfig,
    mut regenerator: Option<Regenerator<'_>>,
) -> Result<TrainedModel> {
    config.validate()?;
    let n = train_set.n();
    if n < config.batch_size {
        return Err(Error::domain(format!(
            "training set ({n} rows) is smaller than the batch size ({})",
            config.batch_size
        )));
    }

    // Deterministic validation split.
    let mut split_rng = substream(config.seed, "val-split");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut split_rng);
    let n_val = ((n as f64 * config.validation_fraction).ceil() as usize).max(1);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let val_x = train_set.y.select(Axis(0), val_idx);
    let val_t = train_set.x.select(Axis(0), val_idx);
    let mut pool_x = train_set.y.select(Axis(0), train_idx);
    let mut pool_t = train_set.x.select(Axis(0), train_idx);

    let mut adam = Adam::new(&model, config.beta1, config.beta2);
    let mut shuffle_rng = substream(config.seed, "batch-shuffle");
    let mut history = Vec::with_capacity(config.max_epochs);

    let val_pred = model.forward_eval(&val_x);
    let mut best_val_loss = NetworkModel::loss_mse(&val_pred, &val_t);
    let mut best_epoch = 0;
    let mut best_model = model.clone();
    let mut regen_count: u64 = 0;

    for epoch in 1..=config.max_epochs {
        if let (Some(cadence), Some(regen)) = (config.regenerate_every, regenerator.as_mut()) {
            if epoch > 1 && (epoch - 1) % cadence == 0 {
                regen_count += 1;
                let fresh = regen(regen_count)?;
                if fresh.y.ncols() != pool_x.ncols() || fresh.x.ncols() != pool_t.ncols() {
                    return Err(Error::domain(
                        "regenerated pool has mismatched dimensions",
                    ));
                }
                pool_x = fresh.y;
                pool_t = fresh.x;
            }
        }
        let pool_n = pool_x.nrows();
        let mut idx: Vec<usize> = (0..pool_n).collect();
        idx.shuffle(&mut shuffle_rng);

        let lr_epoch = |step: u64| config.decay.rate_at(config.learning_rate, epoch, step);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut lr_now = lr_epoch(adam.t + 1);
        for chunk in idx.chunks(config.batch_size) {
            let bx = pool_x.select(Axis(0), chunk);
            let bt = pool_t.select(Axis(0), chunk);
            let (pred, caches) = model.forward_train(&bx);
            let loss = NetworkModel::loss_mse(&pred, &bt);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: batches,
                });
            }
            epoch_loss += loss;
            batches += 1;
            let grads = model.backward(&caches, NetworkModel::loss_mse_grad(&pred, &bt));
            lr_now = lr_epoch(adam.t + 1);
            adam.step(&mut model, &grads, lr_now);
        }
        let val_pred = model.forward_eval(&val_x);
        let val_loss = NetworkModel::loss_mse(&val_pred, &val_t);
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, step: 0 });
        }
        history.push(EpochLog {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            val_loss,
            lr: lr_now,
        });
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_model = model.clone();
        }
    }

    Ok(TrainedModel {
        model: best_model,
        history,
        best_epoch,
        best_val_loss,
    })
}

/// Trains a single bias-free dense layer mapping compositions to responses
/// with full-batch gradient descent on the MSE; the returned matrix is L x M
/// (response rows by composition columns).
///
/// The quadratic objective is descended with the safe step 1/lambda_max of
/// the Gram operator, so convergence needs no tuning.
pub fn train_shallow_forward(dataset: &PairedDataset) -> Result<Array2<f64>> {
    let x = &dataset.x;
    let s = &dataset.y;
    let (n, m) = x.dim();
    let l = s.ncols();
    if n == 0 {
        return Err(Error::domain("shallow fit needs at least one sample"));
    }
    let scale = 2.0 / (n as f64 * l as f64);
    let gram = x.t().dot(x);
    let cross = x.t().dot(s);
    let lambda_max = crate::linear::singular_values(&gram)?[0] * scale;
    let step = 1.0 / lambda_max;
    let mut w = Array2::<f64>::zeros((m, l));
    for iter in 0..200_000 {
        let grad = (gram.dot(&w) - &cross) * scale;
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        w -= &(step * &grad);
        if !gnorm.is_finite() {
            return Err(Error::Divergence {
                epoch: iter,
                step: 0,
            });
        }
        if gnorm < 1e-14 {
            break;
        }
    }
    Ok(w.t().to_owned())
}

/// W' = W - b 1^T: the weight matrix that, together with bias b, produces
/// identical outputs on sum-to-one inputs as (W, 0) does.
pub fn shifted_equivalent(w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = w.clone();
    for (mut row, &bv) in out.rows_mut().into_iter().zip(b.iter()) {
        row.mapv_inplace(|v| v - bv);
    }
    out
}
