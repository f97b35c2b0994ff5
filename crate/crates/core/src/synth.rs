//! Synthetic annotator populations with a planted minority group.
//!
//! Every sample gets a latent label distribution. Majority annotators draw
//! labels from it directly; minority annotators draw from a mixture of it
//! with a one-hot on their shared preferred label.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSpace, RawAnnotation, SoftLabel};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::metrics::js_divergence;
use crate::model::softmax_in_place;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_samples: usize,
    pub n_annotators: usize,
    pub annotations_per_sample: usize,
    pub num_classes: usize,
    pub embedding_dim: usize,
    /// Share of annotators in the minority group.
    pub minority_fraction: f64,
    /// Weight of the preferred-label one-hot in minority annotators' label distribution.
    pub minority_label_bias: f64,
    /// Softmax temperature of the latent distributions; small means near one-hot.
    pub agreement_temperature: f64,
    /// How much the latent scores depend on the embedding, in [0, 1]. 0 makes
    /// labels independent of content.
    #[serde(default)]
    pub embedding_correlation: f64,
    /// Preferred label of the minority group; defaults to the last class.
    #[serde(default)]
    pub preferred_label: Option<usize>,
    /// Offset added to the preferred label's latent score before the softmax.
    #[serde(default)]
    pub preferred_label_offset: f64,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_samples == 0 || self.n_annotators == 0 || self.annotations_per_sample == 0 || self.embedding_dim == 0
        {
            return fail("sample, annotator, annotation and dimension counts must be at least 1".into());
        }
        if self.annotations_per_sample > self.n_annotators {
            return fail(format!(
                "annotations_per_sample ({}) exceeds n_annotators ({})",
                self.annotations_per_sample, self.n_annotators
            ));
        }
        if self.num_classes < 2 {
            return fail("num_classes must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.minority_fraction) {
            return fail(format!(
                "minority_fraction must be in [0, 1), got {}",
                self.minority_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.minority_label_bias) {
            return fail(format!(
                "minority_label_bias must be in [0, 1], got {}",
                self.minority_label_bias
            ));
        }
        if !(self.agreement_temperature > 0.0 && self.agreement_temperature.is_finite()) {
            return fail(format!(
                "agreement_temperature must be positive, got {}",
                self.agreement_temperature
            ));
        }
        if !(0.0..=1.0).contains(&self.embedding_correlation) {
            return fail(format!(
                "embedding_correlation must be in [0, 1], got {}",
                self.embedding_correlation
            ));
        }
        if !self.preferred_label_offset.is_finite() {
            return fail("preferred_label_offset must be finite".into());
        }
        if self.preferred_label.is_some_and(|c| c >= self.num_classes) {
            return fail("preferred_label is outside the label space".into());
        }
        Ok(())
    }

    pub fn preferred_label(&self) -> usize {
        self.preferred_label.unwrap_or(self.num_classes - 1)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticPopulation {
    pub corpus: Corpus,
    pub embeddings: EmbeddingMatrix,
    pub ground_truth: BTreeMap<String, SoftLabel>,
    /// Ids of the minority annotators, sorted.
    pub minority_annotators: Vec<String>,
    pub preferred_label: usize,
}

fn padded(prefix: char, i: usize, n: usize) -> String {
    let width = (n.max(2) - 1).to_string().len();
    format!("{prefix}{i:0width$}")
}

pub fn generate_population(spec: &PopulationSpec) -> Result<SyntheticPopulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (d, c) = (spec.embedding_dim, spec.num_classes);
    let preferred = spec.preferred_label();

    let projection: Vec<f64> = (0..c * d).map(|_| rng.sample(StandardNormal)).collect();

    let mut annotator_order: Vec<usize> = (0..spec.n_annotators).collect();
    annotator_order.shuffle(&mut rng);
    let n_minority = (spec.minority_fraction * spec.n_annotators as f64).round() as usize;
    let mut is_minority = vec![false; spec.n_annotators];
    for &a in &annotator_order[..n_minority] {
        is_minority[a] = true;
    }

    let sample_ids: Vec<String> = (0..spec.n_samples).map(|i| padded('s', i, spec.n_samples)).collect();
    let annotator_ids: Vec<String> = (0..spec.n_annotators)
        .map(|j| padded('a', j, spec.n_annotators))
        .collect();

    let signal = spec.embedding_correlation.sqrt();
    let noise = (1.0 - spec.embedding_correlation).sqrt();
    let mut data = Vec::with_capacity(spec.n_samples * d);
    let mut ground_truth = BTreeMap::new();
    let mut rows = Vec::with_capacity(spec.n_samples * spec.annotations_per_sample);
    for sample_id in &sample_ids {
        let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            x.iter_mut().for_each(|v| *v /= len);
        } else {
            x[0] = 1.0;
        }
        let mut scores: Vec<f64> = (0..c)
            .map(|k| {
                let projected: f64 = projection[k * d..(k + 1) * d].iter().zip(&x).map(|(a, b)| a * b).sum();
                let z: f64 = rng.sample(StandardNormal);
                signal * projected + noise * z
            })
            .collect();
        scores[preferred] += spec.preferred_label_offset;
        scores.iter_mut().for_each(|s| *s /= spec.agreement_temperature);
        softmax_in_place(&mut scores);
        let latent = scores;

        let mut biased = latent
            .iter()
            .map(|p| (1.0 - spec.minority_label_bias) * p)
            .collect::<Vec<_>>();
        biased[preferred] += spec.minority_label_bias;

        let majority_dist = WeightedIndex::new(&latent).expect("softmax output has positive mass");
        let minority_dist = WeightedIndex::new(&biased).expect("mixture has positive mass");
        let mut chosen = index::sample(&mut rng, spec.n_annotators, spec.annotations_per_sample).into_vec();
        chosen.sort_unstable();
        for a in chosen {
            let label = if is_minority[a] {
                minority_dist.sample(&mut rng)
            } else {
                majority_dist.sample(&mut rng)
            };
            rows.push(RawAnnotation {
                sample_id: sample_id.clone(),
                annotator_id: annotator_ids[a].clone(),
                label,
            });
        }
        data.extend_from_slice(&x);
        ground_truth.insert(sample_id.clone(), SoftLabel::from_vec_unchecked(latent));
    }

    let corpus = Corpus::from_annotations(LabelSpace::numbered(c)?, rows)?;
    // sample ids are zero-padded, so generation order is already sorted order
    let embeddings = EmbeddingMatrix::new(d, sample_ids, data)?;
    debug_assert!(embeddings.is_aligned_with(&corpus));
    let mut minority_annotators: Vec<String> = (0..spec.n_annotators)
        .filter(|&a| is_minority[a])
        .map(|a| annotator_ids[a].clone())
        .collect();
    minority_annotators.sort();
    Ok(SyntheticPopulation {
        corpus,
        embeddings,
        ground_truth,
        minority_annotators,
        preferred_label: preferred,
    })
}

/// Mean Jensen-Shannon divergence between predictions and latent distributions.
/// Both maps must cover exactly the same samples.
pub fn ground_truth_js(predicted: &BTreeMap<String, SoftLabel>, truth: &BTreeMap<String, SoftLabel>) -> Result<f64> {
    if predicted.len() != truth.len() || predicted.keys().ne(truth.keys()) {
        let missing = truth.keys().find(|k| !predicted.contains_key(*k));
        let extra = predicted.keys().find(|k| !truth.contains_key(*k));
        return Err(Error::KeyMismatch(format!(
            "predictions and ground truth cover different samples (first missing: {missing:?}, first extra: {extra:?})"
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut total = 0.0;
    for (p, q) in predicted.values().zip(truth.values()) {
        total += js_divergence(p.probs(), q.probs())?;
    }
    Ok(total / truth.len() as f64)
}

#[derive(Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub preferred_label: usize,
    pub minority_annotators: Vec<String>,
    pub samples: BTreeMap<String, SoftLabel>,
}

pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Writes `annotations.csv`, `embeddings.csv` and `ground_truth.json` into `dir`.
pub fn write_population(population: &SyntheticPopulation, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    population.corpus.write_annotations_csv(&dir.join(ANNOTATIONS_FILE))?;
    population.embeddings.write_csv(&dir.join(EMBEDDINGS_FILE))?;
    let truth = GroundTruthFile {
        preferred_label: population.preferred_label,
        minority_annotators: population.minority_annotators.clone(),
        samples: population.ground_truth.clone(),
    };
    let path = dir.join(GROUND_TRUTH_FILE);
    let json = serde_json::to_string_pretty(&truth)?;
    fs::write(&path, json).map_err(|e| Error::io(path, e))?;
    Ok(())
}
