//! Annotator-selection strategies: given a selected sample, pick which of its
//! still-available annotators provides the next label.
//!
//! Ties are resolved the same way everywhere: candidates within
//! [`TIE_TOLERANCE`] of the best score are collected in annotator id order and,
//! when there is more than one, a single `rng.gen_range(0..n)` draw picks among
//! them. A lone candidate consumes no randomness.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatorIdx, Corpus, SampleIdx};
use crate::embeddings::{
    annotator_representation, cosine_similarity, fit_pca, mean_similarity_to_history, EmbeddingMatrix,
};
use crate::error::{Error, Result};
use crate::pool::{LabeledPool, Pools, UnlabeledPool};

/// Scores closer than this to the best one are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Principal components kept for annotator representations.
pub const REPRESENTATION_COMPONENTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorStrategy {
    Random,
    LabelMinority,
    SemanticDiversity,
    RepresentationDiversity,
}

impl AnnotatorStrategy {
    pub const ALL: [AnnotatorStrategy; 4] = [
        AnnotatorStrategy::Random,
        AnnotatorStrategy::LabelMinority,
        AnnotatorStrategy::SemanticDiversity,
        AnnotatorStrategy::RepresentationDiversity,
    ];

    pub fn token(self) -> &'static str {
        match self {
            AnnotatorStrategy::Random => "random",
            AnnotatorStrategy::LabelMinority => "label_minority",
            AnnotatorStrategy::SemanticDiversity => "semantic_diversity",
            AnnotatorStrategy::RepresentationDiversity => "representation_diversity",
        }
    }
}

impl fmt::Display for AnnotatorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for AnnotatorStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnnotatorStrategy::ALL
            .into_iter()
            .find(|a| a.token() == s)
            .ok_or_else(|| Error::Config(format!("unknown annotator strategy {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatorChoice {
    pub sample: SampleIdx,
    pub annotator: AnnotatorIdx,
    pub strategy: AnnotatorStrategy,
    /// The criterion value of the chosen annotator, when the strategy has one.
    pub score: Option<f64>,
}

/// Read-only snapshot the strategies decide on.
#[derive(Clone, Copy)]
pub struct PoolView<'a> {
    pub corpus: &'a Corpus,
    pub emb: &'a EmbeddingMatrix,
    pub unlabeled: &'a UnlabeledPool,
    pub labeled: &'a LabeledPool,
}

impl<'a> PoolView<'a> {
    pub fn new(corpus: &'a Corpus, emb: &'a EmbeddingMatrix, pools: &'a Pools) -> Self {
        PoolView {
            corpus,
            emb,
            unlabeled: &pools.unlabeled,
            labeled: &pools.labeled,
        }
    }

    fn available(&self, sample: SampleIdx) -> Result<Vec<AnnotatorIdx>> {
        let available = self.unlabeled.available_annotators(self.corpus, sample);
        if available.is_empty() {
            return Err(Error::NoAvailableAnnotators(self.corpus.sample(sample).id.clone()));
        }
        Ok(available)
    }

    /// Samples annotated so far by `a`, in consumption order.
    pub fn history_samples(&self, a: AnnotatorIdx) -> Vec<SampleIdx> {
        self.labeled
            .history(a)
            .iter()
            .map(|&t| self.corpus.triple(t).sample)
            .collect()
    }
}

/// Uniform pick, drawing from `rng` only when there is more than one candidate.
pub fn pick_uniform<T: Copy, R: Rng + ?Sized>(candidates: &[T], rng: &mut R) -> T {
    match candidates.len() {
        0 => panic!("pick_uniform needs at least one candidate"),
        1 => candidates[0],
        n => candidates[rng.gen_range(0..n)],
    }
}

/// Best-scoring candidate (max or min); ties resolved with [`pick_uniform`].
fn pick_best<R: Rng + ?Sized>(scored: &[(AnnotatorIdx, f64)], maximize: bool, rng: &mut R) -> (AnnotatorIdx, f64) {
    let best =
        scored
            .iter()
            .map(|&(_, s)| s)
            .fold(if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, |acc, s| {
                if maximize {
                    acc.max(s)
                } else {
                    acc.min(s)
                }
            });
    let tied: Vec<(AnnotatorIdx, f64)> = scored
        .iter()
        .copied()
        .filter(|&(_, s)| (s - best).abs() <= TIE_TOLERANCE)
        .collect();
    pick_uniform(&tied, rng)
}

pub fn select_random_annotator<R: Rng + ?Sized>(
    sample: SampleIdx,
    view: &PoolView<'_>,
    rng: &mut R,
) -> Result<AnnotatorChoice> {
    let available = view.available(sample)?;
    Ok(AnnotatorChoice {
        sample,
        annotator: pick_uniform(&available, rng),
        strategy: AnnotatorStrategy::Random,
        score: None,
    })
}

/// Class with the fewest consumed annotations; ties go to the lowest index.
pub fn minority_label(labeled: &LabeledPool) -> Result<usize> {
    if labeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let counts = labeled.class_counts();
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate().skip(1) {
        if n < counts[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Share of an annotator's consumed labels equal to `label`; 0 for an empty history.
pub fn label_bias(a: AnnotatorIdx, label: usize, view: &PoolView<'_>) -> f64 {
    let history = view.labeled.history(a);
    if history.is_empty() {
        return 0.0;
    }
    let hits = history
        .iter()
        .filter(|&&t| view.corpus.triple(t).label == label)
        .count();
    hits as f64 / history.len() as f64
}

/// Picks the available annotator most biased toward the current minority label.
pub fn select_label_minority<R: Rng + ?Sized>(
    sample: SampleIdx,
    view: &PoolView<'_>,
    rng: &mut R,
) -> Result<AnnotatorChoice> {
    let available = view.available(sample)?;
    let scored: Vec<(AnnotatorIdx, f64)> = match minority_label(view.labeled) {
        Ok(minority) => available.iter().map(|&a| (a, label_bias(a, minority, view))).collect(),
        // nothing collected yet: every bias is zero
        Err(_) => available.iter().map(|&a| (a, 0.0)).collect(),
    };
    let (annotator, score) = pick_best(&scored, true, rng);
    Ok(AnnotatorChoice {
        sample,
        annotator,
        strategy: AnnotatorStrategy::LabelMinority,
        score: Some(score),
    })
}

fn empty_history_choice<R: Rng + ?Sized>(
    sample: SampleIdx,
    available: &[AnnotatorIdx],
    view: &PoolView<'_>,
    strategy: AnnotatorStrategy,
    rng: &mut R,
) -> Option<AnnotatorChoice> {
    let fresh: Vec<AnnotatorIdx> = available
        .iter()
        .copied()
        .filter(|&a| view.labeled.history(a).is_empty())
        .collect();
    (!fresh.is_empty()).then(|| AnnotatorChoice {
        sample,
        annotator: pick_uniform(&fresh, rng),
        strategy,
        score: None,
    })
}

/// Picks the annotator whose past samples are least similar to `sample`.
/// Annotators with an empty history come first.
pub fn select_semantic_diversity<R: Rng + ?Sized>(
    sample: SampleIdx,
    view: &PoolView<'_>,
    rng: &mut R,
) -> Result<AnnotatorChoice> {
    let available = view.available(sample)?;
    if let Some(choice) = empty_history_choice(sample, &available, view, AnnotatorStrategy::SemanticDiversity, rng) {
        return Ok(choice);
    }
    let mut scored = Vec::with_capacity(available.len());
    for &a in &available {
        let history = view.history_samples(a);
        scored.push((a, mean_similarity_to_history(sample, &history, view.emb)?));
    }
    let (annotator, score) = pick_best(&scored, false, rng);
    Ok(AnnotatorChoice {
        sample,
        annotator,
        strategy: AnnotatorStrategy::SemanticDiversity,
        score: Some(score),
    })
}

/// Mean pairwise cosine similarity of each projected annotator to the others.
pub fn mean_pairwise_similarity(projections: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = projections.len();
    let mut sums = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let sim = cosine_similarity(&projections[i], &projections[j])?;
            sums[i] += sim;
            sums[j] += sim;
        }
    }
    let denom = (n.max(2) - 1) as f64;
    Ok(sums.into_iter().map(|s| s / denom).collect())
}

/// Picks the available annotator whose PCA-reduced representation is least
/// similar on average to the other available annotators.
pub fn select_representation_diversity<R: Rng + ?Sized>(
    sample: SampleIdx,
    view: &PoolView<'_>,
    rng: &mut R,
) -> Result<AnnotatorChoice> {
    let strategy = AnnotatorStrategy::RepresentationDiversity;
    let available = view.available(sample)?;
    if available.len() == 1 {
        return Ok(AnnotatorChoice {
            sample,
            annotator: available[0],
            strategy,
            score: None,
        });
    }
    if let Some(choice) = empty_history_choice(sample, &available, view, strategy, rng) {
        return Ok(choice);
    }
    let with_history = view.labeled.annotators_with_history();
    if with_history.len() < 2 {
        let mut choice = select_random_annotator(sample, view, rng)?;
        choice.strategy = strategy;
        return Ok(choice);
    }

    let reps = with_history
        .iter()
        .map(|&a| annotator_representation(a, view.labeled, view.corpus, view.emb).map(|r| r.vector))
        .collect::<Result<Vec<_>>>()?;
    let pca = fit_pca(&reps, REPRESENTATION_COMPONENTS)?;
    let projections = available
        .iter()
        .map(|a| {
            let row = with_history
                .binary_search(a)
                .expect("available annotators have a history here");
            pca.project(&reps[row])
        })
        .collect::<Result<Vec<_>>>()?;
    let means = mean_pairwise_similarity(&projections)?;
    let scored: Vec<(AnnotatorIdx, f64)> = available.iter().copied().zip(means).collect();
    let (annotator, score) = pick_best(&scored, false, rng);
    Ok(AnnotatorChoice {
        sample,
        annotator,
        strategy,
        score: Some(score),
    })
}

pub fn select_annotator<R: Rng + ?Sized>(
    strategy: AnnotatorStrategy,
    sample: SampleIdx,
    view: &PoolView<'_>,
    rng: &mut R,
) -> Result<AnnotatorChoice> {
    match strategy {
        AnnotatorStrategy::Random => select_random_annotator(sample, view, rng),
        AnnotatorStrategy::LabelMinority => select_label_minority(sample, view, rng),
        AnnotatorStrategy::SemanticDiversity => select_semantic_diversity(sample, view, rng),
        AnnotatorStrategy::RepresentationDiversity => select_representation_diversity(sample, view, rng),
    }
}
