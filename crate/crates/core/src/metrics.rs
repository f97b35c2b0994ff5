//! Evaluation metrics: overall and per-annotator F1 / Jensen-Shannon, worst-off
//! aggregates, and entropy alignment between collected and full annotations.

use serde::{Deserialize, Serialize};

use crate::corpus::{annotation_entropy, AnnotatorIdx, Corpus, SampleIdx, SoftLabel};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::model::SoftmaxClassifier;
use crate::pool::LabeledPool;

/// Default low/medium/high entropy bin edges, in nats.
pub const ENTROPY_EDGES: (f64, f64) = (0.43, 0.72);

/// Fraction of annotators averaged into the worst-off scores.
pub const WORST_OFF_FRACTION_DENOM: usize = 10;

/// Jensen-Shannon divergence with base-2 logs, so the result lies in [0, 1].
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).log2();
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Macro F1 over the classes that occur in `gold` or `pred`. A class with no
/// true positives scores 0.
pub fn macro_f1(gold: &[usize], pred: &[usize], num_classes: usize) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fneg = vec![0usize; num_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fneg[g] += 1;
        }
    }
    let mut total = 0.0;
    let mut present = 0usize;
    for c in 0..num_classes {
        if tp[c] + fp[c] + fneg[c] == 0 {
            continue;
        }
        present += 1;
        // F1 = 2tp / (2tp + fp + fn)
        total += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fneg[c]) as f64;
    }
    Ok(total / present as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Lower is worse (F1).
    HigherIsBetter,
    /// Higher is worse (JS).
    LowerIsBetter,
}

/// Number of scores averaged into a worst-off value: `max(1, ceil(n / 10))`.
pub fn worst_off_count(n: usize) -> usize {
    n.div_ceil(WORST_OFF_FRACTION_DENOM).max(1)
}

/// Mean of the worst `worst_off_count(n)` scores.
pub fn worst_off(scores: &[f64], direction: Direction) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut sorted = scores.to_vec();
    match direction {
        Direction::HigherIsBetter => sorted.sort_by(f64::total_cmp),
        Direction::LowerIsBetter => sorted.sort_by(|a, b| b.total_cmp(a)),
    }
    let m = worst_off_count(scores.len());
    Ok(sorted[..m].iter().sum::<f64>() / m as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub f1: f64,
    pub js: f64,
    pub f1_a: f64,
    pub js_a: f64,
    pub f1_w: f64,
    pub js_w: f64,
    pub n_annotators: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerAnnotatorScores {
    pub annotators: Vec<AnnotatorIdx>,
    pub f1: Vec<f64>,
    pub js: Vec<f64>,
}

fn predictions(classifier: &SoftmaxClassifier, samples: &[SampleIdx], emb: &EmbeddingMatrix) -> Result<Vec<SoftLabel>> {
    samples.iter().map(|&s| classifier.predict_dist(emb.row(s))).collect()
}

/// Macro F1 of argmax predictions against majority labels, and mean JS between
/// predictions and the full annotation distributions.
pub fn evaluate_overall(
    classifier: &SoftmaxClassifier,
    samples: &[SampleIdx],
    corpus: &Corpus,
    emb: &EmbeddingMatrix,
) -> Result<(f64, f64)> {
    let preds = predictions(classifier, samples, emb)?;
    overall_from_predictions(samples, &preds, corpus)
}

fn overall_from_predictions(samples: &[SampleIdx], preds: &[SoftLabel], corpus: &Corpus) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut gold = Vec::with_capacity(samples.len());
    let mut pred = Vec::with_capacity(samples.len());
    let mut js_total = 0.0;
    for (&s, p) in samples.iter().zip(preds) {
        let target = corpus.soft_label(s);
        gold.push(target.majority());
        pred.push(p.majority());
        js_total += js_divergence(target.probs(), p.probs())?;
    }
    Ok((
        macro_f1(&gold, &pred, corpus.num_classes())?,
        js_total / samples.len() as f64,
    ))
}

/// F1 and JS of every annotator with at least one annotation in `samples`,
/// using their own labels as gold (F1) and as one-hot targets (JS).
pub fn evaluate_per_annotator(
    classifier: &SoftmaxClassifier,
    samples: &[SampleIdx],
    corpus: &Corpus,
    emb: &EmbeddingMatrix,
) -> Result<PerAnnotatorScores> {
    let preds = predictions(classifier, samples, emb)?;
    per_annotator_from_predictions(samples, &preds, corpus)
}

fn per_annotator_from_predictions(
    samples: &[SampleIdx],
    preds: &[SoftLabel],
    corpus: &Corpus,
) -> Result<PerAnnotatorScores> {
    let num_classes = corpus.num_classes();
    // (gold, predicted class, js) per annotator
    let mut buckets: Vec<(Vec<usize>, Vec<usize>, f64)> = vec![(Vec::new(), Vec::new(), 0.0); corpus.num_annotators()];
    let mut one_hot = vec![0.0; num_classes];
    for (&s, p) in samples.iter().zip(preds) {
        let argmax = p.majority();
        for &t in &corpus.sample(s).annotations {
            let triple = corpus.triple(t);
            one_hot.iter_mut().for_each(|v| *v = 0.0);
            one_hot[triple.label] = 1.0;
            let bucket = &mut buckets[triple.annotator.0];
            bucket.0.push(triple.label);
            bucket.1.push(argmax);
            bucket.2 += js_divergence(&one_hot, p.probs())?;
        }
    }
    let mut scores = PerAnnotatorScores {
        annotators: Vec::new(),
        f1: Vec::new(),
        js: Vec::new(),
    };
    for (a, (gold, pred, js)) in buckets.into_iter().enumerate() {
        if gold.is_empty() {
            continue;
        }
        scores.annotators.push(AnnotatorIdx(a));
        scores.f1.push(macro_f1(&gold, &pred, num_classes)?);
        scores.js.push(js / gold.len() as f64);
    }
    if scores.annotators.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(scores)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// The full metric suite on a set of samples.
pub fn evaluate(
    classifier: &SoftmaxClassifier,
    samples: &[SampleIdx],
    corpus: &Corpus,
    emb: &EmbeddingMatrix,
) -> Result<MetricReport> {
    let preds = predictions(classifier, samples, emb)?;
    let (f1, js) = overall_from_predictions(samples, &preds, corpus)?;
    let per = per_annotator_from_predictions(samples, &preds, corpus)?;
    Ok(MetricReport {
        f1,
        js,
        f1_a: mean(&per.f1),
        js_a: mean(&per.js),
        f1_w: worst_off(&per.f1, Direction::HigherIsBetter)?,
        js_w: worst_off(&per.js, Direction::LowerIsBetter)?,
        n_annotators: per.annotators.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyAlignment {
    /// Collected entropy lands in a lower bin than the full-annotation entropy.
    pub proportion_low: f64,
    pub proportion_aligned: f64,
    /// Collected entropy lands in a higher bin.
    pub proportion_high: f64,
    pub edges: (f64, f64),
}

/// 0 = low, 1 = medium, 2 = high. The low bin is `< lo`, the high bin `> hi`.
pub fn entropy_bin(entropy: f64, edges: (f64, f64)) -> u8 {
    if entropy < edges.0 {
        0
    } else if entropy > edges.1 {
        2
    } else {
        1
    }
}

/// Compares, per labeled sample, the entropy of the collected annotations with
/// the entropy of all its annotations.
pub fn entropy_alignment(labeled: &LabeledPool, corpus: &Corpus, edges: (f64, f64)) -> Result<EntropyAlignment> {
    let samples = labeled.labeled_samples();
    if samples.is_empty() {
        return Err(Error::EmptyPool);
    }
    let (mut low, mut aligned, mut high) = (0usize, 0usize, 0usize);
    for &s in &samples {
        let collected = entropy_bin(annotation_entropy(labeled.soft_label(corpus, s)?.probs()), edges);
        let target = entropy_bin(annotation_entropy(corpus.soft_label(s).probs()), edges);
        match collected.cmp(&target) {
            std::cmp::Ordering::Less => low += 1,
            std::cmp::Ordering::Equal => aligned += 1,
            std::cmp::Ordering::Greater => high += 1,
        }
    }
    let n = samples.len() as f64;
    Ok(EntropyAlignment {
        proportion_low: low as f64 / n,
        proportion_aligned: aligned as f64 / n,
        proportion_high: high as f64 / n,
        edges,
    })
}
