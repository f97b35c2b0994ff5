//! Unaggregated annotation corpora.
//!
//! A [`Corpus`] owns every `(sample, annotator, label)` triple together with
//! per-sample and per-annotator indexes. Samples and annotators are stored in
//! sorted id order, so index order and id order coincide everywhere.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a sample inside a [`Corpus`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleIdx(pub usize);

/// Index of an annotator inside a [`Corpus`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotatorIdx(pub usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::InvalidLabelSpace(format!(
                "need at least 2 classes, got {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidLabelSpace(format!("class {i} has an empty name")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidLabelSpace(format!("duplicate class name {name:?}")));
            }
        }
        Ok(LabelSpace { names })
    }

    /// Label space with classes named `"0"`, `"1"`, ...
    pub fn numbered(num_classes: usize) -> Result<Self> {
        Self::new((0..num_classes).map(|c| c.to_string()))
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Resolves a label given either as a class name or as an integer index.
    /// Names take precedence.
    pub fn parse(&self, raw: &str) -> Option<usize> {
        let raw = raw.trim();
        if let Some(c) = self.names.iter().position(|n| n == raw) {
            return Some(c);
        }
        raw.parse::<usize>().ok().filter(|&c| c < self.names.len())
    }
}

impl TryFrom<Vec<String>> for LabelSpace {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        LabelSpace::new(names)
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(space: LabelSpace) -> Self {
        space.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnnotationTriple {
    pub sample: SampleIdx,
    pub annotator: AnnotatorIdx,
    pub label: usize,
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub id: String,
    pub text: Option<String>,
    /// Triple indices, ordered by annotator.
    pub annotations: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct AnnotatorProfile {
    pub id: String,
    /// Triple indices, ordered by sample.
    pub annotations: Vec<usize>,
}

/// A probability vector over the label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SoftLabel(Vec<f64>);

const SIMPLEX_TOL: f64 = 1e-9;

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidLabelSpace(format!("not a probability vector: {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidLabelSpace(format!("probabilities sum to {total}, not 1")));
        }
        Ok(SoftLabel(probs))
    }

    /// Builds a soft label without validation. Callers guarantee the simplex invariant.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        SoftLabel(probs)
    }

    pub fn one_hot(class: usize, num_classes: usize) -> Self {
        let mut probs = vec![0.0; num_classes];
        probs[class] = 1.0;
        SoftLabel(probs)
    }

    pub fn uniform(num_classes: usize) -> Self {
        SoftLabel(vec![1.0 / num_classes as f64; num_classes])
    }

    /// Maximum-likelihood aggregation: the relative frequency of each class.
    /// Returns `None` when there are no labels.
    pub fn from_labels(labels: impl IntoIterator<Item = usize>, num_classes: usize) -> Option<Self> {
        let mut counts = vec![0usize; num_classes];
        let mut total = 0usize;
        for label in labels {
            counts[label] += 1;
            total += 1;
        }
        (total > 0).then(|| SoftLabel::from_counts(&counts))
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        assert!(total > 0, "cannot aggregate zero counts");
        SoftLabel(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Majority class; ties go to the lowest class index.
    pub fn majority(&self) -> usize {
        majority_label(&self.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        annotation_entropy(&self.0)
    }
}

/// Argmax with ties broken toward the lowest index.
pub fn majority_label(probs: &[f64]) -> usize {
    let mut best = 0;
    for (c, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = c;
        }
    }
    best
}

/// `-sum p ln p`, with `0 ln 0 = 0`.
pub fn annotation_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct Corpus {
    label_space: LabelSpace,
    samples: Vec<SampleRecord>,
    annotators: Vec<AnnotatorProfile>,
    triples: Vec<AnnotationTriple>,
    sample_lookup: HashMap<String, SampleIdx>,
    annotator_lookup: HashMap<String, AnnotatorIdx>,
}

/// One raw annotation row before indexing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawAnnotation {
    pub sample_id: String,
    pub annotator_id: String,
    pub label: usize,
}

impl Corpus {
    /// Builds a corpus from raw annotation rows. Row numbers in errors are 1-based
    /// positions in `rows`.
    pub fn from_annotations(label_space: LabelSpace, rows: Vec<RawAnnotation>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let num_classes = label_space.num_classes();
        let mut seen: HashMap<(&str, &str), usize> = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.label >= num_classes {
                return Err(Error::UnknownLabel {
                    label: row.label.to_string(),
                    row: i + 1,
                });
            }
            if seen
                .insert((row.sample_id.as_str(), row.annotator_id.as_str()), i)
                .is_some()
            {
                return Err(Error::DuplicateAnnotation {
                    sample_id: row.sample_id.clone(),
                    annotator_id: row.annotator_id.clone(),
                    row: i + 1,
                });
            }
        }
        drop(seen);

        let mut sample_ids: Vec<&str> = rows.iter().map(|r| r.sample_id.as_str()).collect();
        sample_ids.sort_unstable();
        sample_ids.dedup();
        let mut annotator_ids: Vec<&str> = rows.iter().map(|r| r.annotator_id.as_str()).collect();
        annotator_ids.sort_unstable();
        annotator_ids.dedup();

        let sample_lookup: HashMap<String, SampleIdx> = sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), SampleIdx(i)))
            .collect();
        let annotator_lookup: HashMap<String, AnnotatorIdx> = annotator_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), AnnotatorIdx(i)))
            .collect();

        let mut triples: Vec<AnnotationTriple> = rows
            .iter()
            .map(|r| AnnotationTriple {
                sample: sample_lookup[&r.sample_id],
                annotator: annotator_lookup[&r.annotator_id],
                label: r.label,
            })
            .collect();
        triples.sort_by_key(|t| (t.sample, t.annotator));

        let mut samples: Vec<SampleRecord> = sample_ids
            .iter()
            .map(|id| SampleRecord {
                id: id.to_string(),
                text: None,
                annotations: Vec::new(),
            })
            .collect();
        let mut annotators: Vec<AnnotatorProfile> = annotator_ids
            .iter()
            .map(|id| AnnotatorProfile {
                id: id.to_string(),
                annotations: Vec::new(),
            })
            .collect();
        for (t, triple) in triples.iter().enumerate() {
            samples[triple.sample.0].annotations.push(t);
            annotators[triple.annotator.0].annotations.push(t);
        }

        Ok(Corpus {
            label_space,
            samples,
            annotators,
            triples,
            sample_lookup,
            annotator_lookup,
        })
    }

    /// Attaches texts to samples. Unknown sample ids are rejected.
    pub fn set_texts(&mut self, texts: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (id, text) in texts {
            let idx = self.sample_idx(&id)?;
            self.samples[idx.0].text = Some(text);
        }
        Ok(())
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn num_classes(&self) -> usize {
        self.label_space.num_classes()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn num_annotators(&self) -> usize {
        self.annotators.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn samples(&self) -> &[SampleRecord] {
        &self.samples
    }

    pub fn annotators(&self) -> &[AnnotatorProfile] {
        &self.annotators
    }

    pub fn triples(&self) -> &[AnnotationTriple] {
        &self.triples
    }

    pub fn triple(&self, t: usize) -> &AnnotationTriple {
        &self.triples[t]
    }

    pub fn sample(&self, s: SampleIdx) -> &SampleRecord {
        &self.samples[s.0]
    }

    pub fn annotator(&self, a: AnnotatorIdx) -> &AnnotatorProfile {
        &self.annotators[a.0]
    }

    pub fn sample_idx(&self, id: &str) -> Result<SampleIdx> {
        self.sample_lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSample(id.to_string()))
    }

    pub fn annotator_idx(&self, id: &str) -> Option<AnnotatorIdx> {
        self.annotator_lookup.get(id).copied()
    }

    /// Sample ids in index order.
    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// Aggregated soft label over every annotation of `s`.
    pub fn soft_label(&self, s: SampleIdx) -> SoftLabel {
        SoftLabel::from_labels(
            self.samples[s.0].annotations.iter().map(|&t| self.triples[t].label),
            self.num_classes(),
        )
        .expect("corpus samples always have at least one annotation")
    }

    pub fn aggregate_soft_label(&self, sample_id: &str) -> Result<SoftLabel> {
        Ok(self.soft_label(self.sample_idx(sample_id)?))
    }

    /// Total annotations over a set of samples.
    pub fn annotation_count(&self, samples: &[SampleIdx]) -> usize {
        samples.iter().map(|s| self.samples[s.0].annotations.len()).sum()
    }

    pub fn write_annotations_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["sample_id", "annotator_id", "label"])?;
        for triple in &self.triples {
            writer.write_record([
                self.samples[triple.sample.0].id.as_str(),
                self.annotators[triple.annotator.0].id.as_str(),
                self.label_space.names()[triple.label].as_str(),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct AnnotationRow {
    sample_id: String,
    annotator_id: String,
    label: String,
}

#[derive(Deserialize)]
struct TextRow {
    sample_id: String,
    text: String,
}

/// Reads an annotations CSV (`sample_id,annotator_id,label`) and an optional
/// JSON-lines texts file (`{"sample_id": ..., "text": ...}`).
pub fn load_corpus(annotations_path: &Path, label_space: LabelSpace, texts_path: Option<&Path>) -> Result<Corpus> {
    let file = File::open(annotations_path).map_err(|e| Error::io(annotations_path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<AnnotationRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            path: annotations_path.to_path_buf(),
            row: line,
            message: e.to_string(),
        })?;
        let label = label_space.parse(&record.label).ok_or_else(|| Error::UnknownLabel {
            label: record.label.clone(),
            row: line,
        })?;
        rows.push(RawAnnotation {
            sample_id: record.sample_id,
            annotator_id: record.annotator_id,
            label,
        });
    }
    let mut corpus = Corpus::from_annotations(label_space, rows).map_err(|e| match e {
        // shift raw row positions to file line numbers
        Error::DuplicateAnnotation {
            sample_id,
            annotator_id,
            row,
        } => Error::DuplicateAnnotation {
            sample_id,
            annotator_id,
            row: row + 1,
        },
        other => other,
    })?;

    if let Some(path) = texts_path {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut texts = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: TextRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: e.to_string(),
            })?;
            texts.push((row.sample_id, row.text));
        }
        corpus.set_texts(texts)?;
    }
    Ok(corpus)
}

/// Sample-level train/validation/test partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<SampleIdx>,
    pub val: Vec<SampleIdx>,
    pub test: Vec<SampleIdx>,
    pub seed: u64,
}

/// Shuffles samples with `seed` and cuts them into `floor(0.8n)` train,
/// `floor(0.1n)` validation and the remainder as test. Each part is returned
/// in sorted index order.
pub fn split_corpus(corpus: &Corpus, seed: u64) -> Result<SplitSpec> {
    let n = corpus.num_samples();
    if n < 10 {
        return Err(Error::CorpusTooSmall(n));
    }
    let mut order: Vec<SampleIdx> = (0..n).map(SampleIdx).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitSpec { train, val, test, seed })
}
