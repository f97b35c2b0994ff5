//! Sample-selection strategies over the unlabeled pool.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{annotation_entropy, SampleIdx};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model::SoftmaxClassifier;
use crate::pool::UnlabeledPool;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    Random,
    Uncertainty,
}

impl SampleStrategy {
    pub fn token(self) -> &'static str {
        match self {
            SampleStrategy::Random => "random",
            SampleStrategy::Uncertainty => "uncertainty",
        }
    }
}

impl fmt::Display for SampleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SampleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SampleStrategy::Random),
            "uncertainty" => Ok(SampleStrategy::Uncertainty),
            other => Err(Error::Config(format!("unknown sample strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleBatch {
    pub samples: Vec<SampleIdx>,
    pub strategy: SampleStrategy,
}

/// `min(ceil(5% of annotations), unique training samples)`, at least 1.
pub fn batch_size(total_annotations: usize, unique_train_samples: usize) -> usize {
    let five_percent = total_annotations.div_ceil(20);
    five_percent.min(unique_train_samples).max(1)
}

/// Draws `min(b, |pool|)` distinct selectable samples uniformly at random.
pub fn select_random<R: Rng + ?Sized>(pool: &UnlabeledPool, b: usize, rng: &mut R) -> Result<SampleBatch> {
    let candidates = pool.selectable();
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let amount = b.min(candidates.len());
    let samples = index::sample(rng, candidates.len(), amount)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    Ok(SampleBatch {
        samples,
        strategy: SampleStrategy::Random,
    })
}

/// The `b` selectable samples with the highest predictive entropy. Ties keep
/// sample id order.
pub fn select_uncertainty(
    pool: &UnlabeledPool,
    b: usize,
    classifier: &SoftmaxClassifier,
    emb: &EmbeddingMatrix,
) -> Result<SampleBatch> {
    let candidates = pool.selectable();
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for s in candidates {
        let dist = classifier.predict_dist(emb.row(s))?;
        scored.push((annotation_entropy(dist.probs()), s));
    }
    // stable sort keeps the sorted-id order among equal entropies
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(b);
    Ok(SampleBatch {
        samples: scored.into_iter().map(|(_, s)| s).collect(),
        strategy: SampleStrategy::Uncertainty,
    })
}
