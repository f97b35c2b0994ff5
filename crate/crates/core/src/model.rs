//! Linear softmax classifier trained with soft-label cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::SoftLabel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            epochs: 20,
            batch_size: 128,
            weight_decay: 0.01,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be a nonnegative number, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// One training example: features plus a soft target.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub features: &'a [f64],
    pub target: &'a [f64],
}

impl<'a> Example<'a> {
    pub fn new(features: &'a [f64], target: &'a SoftLabel) -> Self {
        Example {
            features,
            target: target.probs(),
        }
    }
}

/// Gradient of the batch loss, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    dim: usize,
    classes: usize,
    /// Row-major `classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    seed: u64,
}

impl SoftmaxClassifier {
    /// Weights i.i.d. uniform in [-0.01, 0.01], zero bias.
    pub fn new(dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..dim * classes).map(|_| rng.gen_range(-0.01..=0.01)).collect();
        SoftmaxClassifier {
            dim,
            classes,
            weights,
            bias: vec![0.0; classes],
            seed,
        }
    }

    pub fn from_parameters(dim: usize, classes: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != dim * classes {
            return Err(Error::DimensionMismatch {
                expected: dim * classes,
                actual: weights.len(),
            });
        }
        if bias.len() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                actual: bias.len(),
            });
        }
        Ok(SoftmaxClassifier {
            dim,
            classes,
            weights,
            bias,
            seed: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let row = &self.weights[c * self.dim..(c + 1) * self.dim];
            *o = self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn probs_into(&self, x: &[f64], out: &mut [f64]) {
        self.logits_into(x, out);
        softmax_in_place(out);
    }

    pub fn predict_dist(&self, x: &[f64]) -> Result<SoftLabel> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let mut probs = vec![0.0; self.classes];
        self.probs_into(x, &mut probs);
        Ok(SoftLabel::from_vec_unchecked(probs))
    }

    /// Mean cross-entropy over the batch plus `weight_decay / 2 * |W|^2`.
    pub fn loss(&self, batch: &[Example<'_>], weight_decay: f64) -> f64 {
        let mut probs = vec![0.0; self.classes];
        let mut total = 0.0;
        for ex in batch {
            self.probs_into(ex.features, &mut probs);
            total -= ex
                .target
                .iter()
                .zip(&probs)
                .filter(|(t, _)| **t > 0.0)
                .map(|(t, p)| t * p.ln())
                .sum::<f64>();
        }
        let decay = 0.5 * weight_decay * self.weights.iter().map(|w| w * w).sum::<f64>();
        total / batch.len() as f64 + decay
    }

    /// Analytic gradient of [`SoftmaxClassifier::loss`]: the mean of
    /// `(softmax - target) x^T`, plus `weight_decay * W`. The bias is not decayed.
    pub fn gradient(&self, batch: &[Example<'_>], weight_decay: f64) -> Gradient {
        let mut grad = Gradient {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.classes],
        };
        let mut probs = vec![0.0; self.classes];
        self.accumulate_gradient(batch, &mut probs, &mut grad);
        let inv = 1.0 / batch.len() as f64;
        for (g, w) in grad.weights.iter_mut().zip(&self.weights) {
            *g = *g * inv + weight_decay * w;
        }
        grad.bias.iter_mut().for_each(|g| *g *= inv);
        grad
    }

    fn accumulate_gradient(&self, batch: &[Example<'_>], probs: &mut [f64], grad: &mut Gradient) {
        for ex in batch {
            self.probs_into(ex.features, probs);
            for (c, (p, t)) in probs.iter().zip(ex.target).enumerate() {
                let delta = p - t;
                grad.bias[c] += delta;
                let row = &mut grad.weights[c * self.dim..(c + 1) * self.dim];
                for (g, x) in row.iter_mut().zip(ex.features) {
                    *g += delta * x;
                }
            }
        }
    }

    /// Mini-batch gradient descent for `config.epochs` epochs.
    pub fn train(mut self, data: &[Example<'_>], config: &TrainConfig) -> Self {
        self.fit(data, config, |_, _| ());
        self
    }

    /// Like [`SoftmaxClassifier::train`] but also returns the full-dataset
    /// loss after every epoch.
    pub fn train_traced(mut self, data: &[Example<'_>], config: &TrainConfig) -> (Self, Vec<f64>) {
        let mut losses = Vec::with_capacity(config.epochs);
        self.fit(data, config, |model, data| {
            losses.push(model.loss(data, config.weight_decay))
        });
        (self, losses)
    }

    fn fit(&mut self, data: &[Example<'_>], config: &TrainConfig, mut after_epoch: impl FnMut(&Self, &[Example<'_>])) {
        if data.is_empty() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut probs = vec![0.0; self.classes];
        let mut grad = Gradient {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.classes],
        };
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| data[i]));
                grad.weights.iter_mut().for_each(|g| *g = 0.0);
                grad.bias.iter_mut().for_each(|g| *g = 0.0);
                self.accumulate_gradient(&batch, &mut probs, &mut grad);
                let step = config.learning_rate / batch.len() as f64;
                let decay = config.learning_rate * config.weight_decay;
                for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
                    *w -= step * g + decay * *w;
                }
                for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
                    *b -= step * g;
                }
            }
            after_epoch(self, data);
        }
    }
}

pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    logits.iter_mut().for_each(|l| *l /= total);
}

/// JSON checkpoint: dimensions, row-major weights, bias and the training config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub dim: usize,
    pub num_classes: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn new(model: &SoftmaxClassifier, config: &TrainConfig) -> Self {
        Checkpoint {
            dim: model.dim,
            num_classes: model.classes,
            weights: model.weights.clone(),
            bias: model.bias.clone(),
            config: config.clone(),
        }
    }

    pub fn into_classifier(self) -> Result<SoftmaxClassifier> {
        SoftmaxClassifier::from_parameters(self.dim, self.num_classes, self.weights, self.bias)
    }
}
