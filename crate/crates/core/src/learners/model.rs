//! Logistic regression trained by mini-batch gradient descent.

use std::collections::BTreeMap;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::SparseVector;
use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Dev evaluations without improvement before stopping.
    pub patience: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.1, epochs: 50, batch_size: 32, patience: 5, seed: 0 }
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub dev_accuracy: Vec<f64>,
    pub stopped_early: bool,
}

/// Labeled training example.
pub type Sample<T> = (SparseVector<T>, bool);

/// Weights are dense internally and written out sparse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseModel<T>", from = "SparseModel<T>")]
#[serde(bound(serialize = "T: Float + Serialize", deserialize = "T: Float + Deserialize<'de>"))]
pub struct LogisticModel<T: Float> {
    weights: Vec<T>,
    bias: T,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct SparseModel<T> {
    dim: usize,
    bias: T,
    weights: BTreeMap<u32, T>,
    config: TrainConfig,
}

impl<T: Float> From<LogisticModel<T>> for SparseModel<T> {
    fn from(m: LogisticModel<T>) -> Self {
        SparseModel {
            dim: m.weights.len(),
            bias: m.bias,
            weights: m.sparse_weights(),
            config: m.config,
        }
    }
}

impl<T: Float> From<SparseModel<T>> for LogisticModel<T> {
    fn from(s: SparseModel<T>) -> Self {
        let mut weights = vec![T::zero(); s.dim];
        for (i, w) in s.weights {
            if let Some(slot) = weights.get_mut(i as usize) {
                *slot = w;
            }
        }
        LogisticModel { weights, bias: s.bias, config: s.config }
    }
}

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("f64 converts to the scalar type")
}

fn sigmoid<T: Float>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus<T: Float>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

fn target<T: Float>(y: bool) -> T {
    if y {
        T::one()
    } else {
        T::zero()
    }
}

impl<T: Float> LogisticModel<T> {
    /// All-zero model over `dim` features.
    pub fn new(dim: usize, config: TrainConfig) -> Self {
        LogisticModel { weights: vec![T::zero(); dim], bias: T::zero(), config }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn set_bias(&mut self, b: T) {
        self.bias = b;
    }

    pub fn weight(&self, i: u32) -> T {
        self.weights.get(i as usize).copied().unwrap_or_else(T::zero)
    }

    pub fn set_weight(&mut self, i: u32, w: T) {
        self.weights[i as usize] = w;
    }

    pub fn sparse_weights(&self) -> BTreeMap<u32, T> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(i, &w)| (i as u32, w))
            .collect()
    }

    pub fn score(&self, x: &SparseVector<T>) -> T {
        self.bias + x.dot(&self.weights)
    }

    /// Positive class iff the score is above zero.
    pub fn predict(&self, x: &SparseVector<T>) -> bool {
        self.score(x) > T::zero()
    }

    pub fn probability(&self, x: &SparseVector<T>) -> T {
        sigmoid(self.score(x))
    }

    /// Mean logistic loss.
    pub fn loss(&self, data: &[Sample<T>]) -> T {
        if data.is_empty() {
            return T::zero();
        }
        let total = data
            .iter()
            .map(|(x, y)| {
                let z = self.score(x);
                softplus(z) - target::<T>(*y) * z
            })
            .fold(T::zero(), |a, b| a + b);
        total / cast(data.len() as f64)
    }

    /// Gradient of [`loss`](Self::loss) with respect to the weights and the bias.
    pub fn gradient(&self, data: &[Sample<T>]) -> (SparseVector<T>, T) {
        let mut g = SparseVector::new();
        let mut gb = T::zero();
        if data.is_empty() {
            return (g, gb);
        }
        let n: T = cast(data.len() as f64);
        for (x, y) in data {
            let r = (sigmoid(self.score(x)) - target::<T>(*y)) / n;
            gb = gb + r;
            for (i, v) in x.iter() {
                g.add(i, r * v);
            }
        }
        (g, gb)
    }

    fn step(&mut self, batch: &[&Sample<T>], lr: T) {
        let n: T = cast(batch.len() as f64);
        let mut gb = T::zero();
        let mut g: BTreeMap<u32, T> = BTreeMap::new();
        for (x, y) in batch {
            let r = (sigmoid(self.score(x)) - target::<T>(*y)) / n;
            gb = gb + r;
            for (i, v) in x.iter() {
                let e = g.entry(i).or_insert_with(T::zero);
                *e = *e + r * v;
            }
        }
        for (i, gi) in g {
            let w = &mut self.weights[i as usize];
            *w = *w - lr * gi;
        }
        self.bias = self.bias - lr * gb;
    }

    pub fn accuracy(&self, data: &[Sample<T>]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter().filter(|(x, y)| self.predict(x) == *y).count() as f64 / data.len() as f64
    }

    /// Fit from zero weights. With `dev` data, keeps the weights of the best dev evaluation
    /// (accuracy, then loss) and stops after `patience` evaluations without improvement.
    pub fn train(
        dim: usize,
        config: TrainConfig,
        train: &[Sample<T>],
        dev: Option<&[Sample<T>]>,
    ) -> Result<(Self, TrainLog), LearnerError> {
        if train.is_empty() {
            return Err(LearnerError::EmptyTrainingSet);
        }
        if config.batch_size == 0 {
            return Err(LearnerError::InvalidConfig("batch size must be positive".into()));
        }
        if let Some(m) = train.iter().filter_map(|(x, _)| x.max_index()).max() {
            if m as usize >= dim {
                return Err(LearnerError::InvalidConfig(format!("feature index {m} outside dimension {dim}")));
            }
        }
        let lr: T = cast(config.learning_rate);
        let mut model = LogisticModel::new(dim, config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut log = TrainLog::default();
        let mut best: Option<(f64, f64, LogisticModel<T>)> = None;
        let mut stale = 0;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &train[i]).collect();
                model.step(&batch, lr);
            }
            log.epochs_run = epoch + 1;
            log.train_loss.push(model.loss(train).to_f64().unwrap_or(f64::NAN));
            let Some(dev) = dev.filter(|d| !d.is_empty()) else {
                log.best_epoch = epoch + 1;
                continue;
            };
            let acc = model.accuracy(dev);
            let loss = model.loss(dev).to_f64().unwrap_or(f64::INFINITY);
            log.dev_accuracy.push(acc);
            let improved = match &best {
                None => true,
                Some((a, l, _)) => acc > *a || (acc == *a && loss < *l),
            };
            if improved {
                best = Some((acc, loss, model.clone()));
                log.best_epoch = epoch + 1;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
        Ok((best.map(|(_, _, m)| m).unwrap_or(model), log))
    }
}

/// Five-point central difference of the mean loss along one coordinate.
fn numeric_derivative<T: Float>(model: &LogisticModel<T>, data: &[Sample<T>], h: f64, shift: impl Fn(&mut LogisticModel<T>, T)) -> f64 {
    let at = |k: f64| {
        let mut m = model.clone();
        shift(&mut m, cast(k * h));
        m.loss(data).to_f64().unwrap_or(f64::NAN)
    };
    (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h)
}

/// Largest relative error between analytic and finite-difference gradients of the mean loss.
pub fn gradient_check<T: Float>(model: &LogisticModel<T>, data: &[Sample<T>], h: f64) -> f64 {
    let (g, gb) = model.gradient(data);
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    for i in 0..model.dim() as u32 {
        let numeric = numeric_derivative(model, data, h, |m, d| m.set_weight(i, model.weight(i) + d));
        worst = worst.max(rel(g.get(i).to_f64().unwrap_or(f64::NAN), numeric));
    }
    let numeric = numeric_derivative(model, data, h, |m, d| m.set_bias(model.bias() + d));
    worst.max(rel(gb.to_f64().unwrap_or(f64::NAN), numeric))
}
