use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::batch_labels;
use super::{forward, loss_and_gradient, RegressorParams, Target};
use crate::error::{Error, Result};
use crate::metrics::ccc;
use crate::segmentation::Segment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; at least 1.
    pub patience: usize,
    /// Segments per gradient step.
    pub batch: usize,
    pub seed: u64,
    pub target: Target,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            batch: 8,
            seed: 0,
            target: Target::Valence,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 || self.patience == 0 || self.batch == 0 {
            return Err(Error::InvalidConfig(
                "max_epochs, patience and batch must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("Adam decays must be in [0, 1), epsilon > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean batch loss of epochs `1..`.
    pub train_loss: Vec<f64>,
    /// Dev CCC after each epoch; entry 0 is the initial parameters.
    pub dev_ccc: Vec<f64>,
    pub best_epoch: usize,
    pub best_dev_ccc: f64,
    pub stopped_early: bool,
}

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, config: &TrainConfig) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// Patience-based early stopping on a score to maximize.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    /// `initial` is the score before any training (epoch 0).
    pub fn new(patience: usize, initial: f64) -> Self {
        EarlyStopping {
            patience,
            best: initial,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Records the score of `epoch`; returns `true` when training should stop.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.patience
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// CCC of the concatenated per-segment predictions against labels.
pub fn dev_ccc(params: &RegressorParams, dev_set: &[Segment], target: Target) -> Result<f64> {
    let labels = batch_labels(dev_set, target)?;
    let mut preds = Vec::with_capacity(labels.len());
    for seg in dev_set {
        preds.extend(forward(params, &seg.frames)?);
    }
    if preds.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dev predictions".into()));
    }
    Ok(ccc(&preds, &labels)?.ccc)
}

/// Fits `params` on `train_set` with early stopping on `dev_set`; returns
/// the parameters of the best dev epoch (possibly the initial ones).
///
/// Deterministic in its inputs, including the per-epoch shuffle.
pub fn train(
    params: &RegressorParams,
    train_set: &[Segment],
    dev_set: &[Segment],
    config: &TrainConfig,
) -> Result<(RegressorParams, TrainTrace)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySet("train"));
    }
    if dev_set.is_empty() {
        return Err(Error::EmptySet("dev"));
    }
    let target = config.target;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = params.clone();
    let mut best = params.clone();
    let mut adam = Adam::new(params.len(), config);
    let initial = dev_ccc(&current, dev_set, target)?;
    let mut stopper = EarlyStopping::new(config.patience, initial);
    let mut trace = TrainTrace {
        train_loss: Vec::new(),
        dev_ccc: vec![initial],
        best_epoch: 0,
        best_dev_ccc: initial,
        stopped_early: false,
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(config.batch);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(config.batch) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i].clone()));
            let out = loss_and_gradient(&current, &batch, target)?;
            if !out.loss.is_finite() || out.grad.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("loss or gradient at epoch {epoch}")));
            }
            loss_sum += out.loss;
            steps += 1;
            adam.update(current.as_mut_slice(), out.grad.as_slice());
        }
        trace.train_loss.push(loss_sum / steps as f64);
        let score = dev_ccc(&current, dev_set, target)?;
        trace.dev_ccc.push(score);
        let stop = stopper.observe(epoch, score);
        if stopper.improved_at(epoch) {
            best = current.clone();
        }
        if stop {
            trace.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    trace.best_epoch = stopper.best_epoch();
    trace.best_dev_ccc = stopper.best();
    Ok((best, trace))
}
