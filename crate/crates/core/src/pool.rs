//! Labeled and unlabeled annotation pools over the training split.

use crate::corpus::{AnnotatorIdx, Corpus, SampleIdx, SoftLabel};
use crate::error::{Error, Result};

/// Unconsumed annotations of each training sample.
#[derive(Clone, Debug)]
pub struct UnlabeledPool {
    /// Indexed by sample; sorted triple indices (which are annotator-ordered).
    remaining: Vec<Vec<usize>>,
    train: Vec<SampleIdx>,
}

impl UnlabeledPool {
    pub fn new(corpus: &Corpus, train: &[SampleIdx]) -> Self {
        let mut remaining = vec![Vec::new(); corpus.num_samples()];
        for &s in train {
            remaining[s.0] = corpus.sample(s).annotations.clone();
        }
        let mut train = train.to_vec();
        train.sort_unstable();
        UnlabeledPool { remaining, train }
    }

    pub fn remaining(&self, s: SampleIdx) -> &[usize] {
        &self.remaining[s.0]
    }

    /// Training samples that still have at least one unconsumed annotation, sorted.
    pub fn selectable(&self) -> Vec<SampleIdx> {
        self.train
            .iter()
            .copied()
            .filter(|s| !self.remaining[s.0].is_empty())
            .collect()
    }

    /// All unconsumed triples, in sample then annotator order.
    pub fn remaining_triples(&self) -> Vec<usize> {
        self.train
            .iter()
            .flat_map(|s| self.remaining[s.0].iter().copied())
            .collect()
    }

    pub fn total_remaining(&self) -> usize {
        self.train.iter().map(|s| self.remaining[s.0].len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.train.iter().all(|s| self.remaining[s.0].is_empty())
    }

    pub fn train_samples(&self) -> &[SampleIdx] {
        &self.train
    }

    /// Annotators holding an unconsumed annotation of `s`, in id order.
    pub fn available_annotators(&self, corpus: &Corpus, s: SampleIdx) -> Vec<AnnotatorIdx> {
        self.remaining[s.0]
            .iter()
            .map(|&t| corpus.triple(t).annotator)
            .collect()
    }

    /// The unconsumed triple of `annotator` on `s`, if any.
    pub fn triple_of(&self, corpus: &Corpus, s: SampleIdx, annotator: AnnotatorIdx) -> Option<usize> {
        self.remaining[s.0]
            .binary_search_by_key(&annotator, |&t| corpus.triple(t).annotator)
            .ok()
            .map(|pos| self.remaining[s.0][pos])
    }

    fn take(&mut self, s: SampleIdx, t: usize) -> bool {
        match self.remaining[s.0].binary_search(&t) {
            Ok(pos) => {
                self.remaining[s.0].remove(pos);
                true
            }
            Err(_) => false,
        }
    }
}

/// Consumed annotations (the labeled set), indexed both by sample and by annotator.
#[derive(Clone, Debug)]
pub struct LabeledPool {
    by_sample: Vec<Vec<usize>>,
    by_annotator: Vec<Vec<usize>>,
    class_counts: Vec<usize>,
    total: usize,
}

impl LabeledPool {
    pub fn new(corpus: &Corpus) -> Self {
        LabeledPool {
            by_sample: vec![Vec::new(); corpus.num_samples()],
            by_annotator: vec![Vec::new(); corpus.num_annotators()],
            class_counts: vec![0; corpus.num_classes()],
            total: 0,
        }
    }

    /// Consumed triples of `s`, in consumption order.
    pub fn consumed(&self, s: SampleIdx) -> &[usize] {
        &self.by_sample[s.0]
    }

    /// Consumed triples of `a`, in consumption order.
    pub fn history(&self, a: AnnotatorIdx) -> &[usize] {
        &self.by_annotator[a.0]
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Samples with at least one consumed annotation, sorted.
    pub fn labeled_samples(&self) -> Vec<SampleIdx> {
        self.by_sample
            .iter()
            .enumerate()
            .filter(|(_, ts)| !ts.is_empty())
            .map(|(s, _)| SampleIdx(s))
            .collect()
    }

    /// Annotators with a nonempty history, sorted.
    pub fn annotators_with_history(&self) -> Vec<AnnotatorIdx> {
        self.by_annotator
            .iter()
            .enumerate()
            .filter(|(_, ts)| !ts.is_empty())
            .map(|(a, _)| AnnotatorIdx(a))
            .collect()
    }

    /// Aggregated soft label over the consumed annotations of `s`.
    pub fn soft_label(&self, corpus: &Corpus, s: SampleIdx) -> Result<SoftLabel> {
        SoftLabel::from_labels(
            self.by_sample[s.0].iter().map(|&t| corpus.triple(t).label),
            corpus.num_classes(),
        )
        .ok_or_else(|| Error::NoAnnotations(corpus.sample(s).id.clone()))
    }

    fn push(&mut self, corpus: &Corpus, t: usize) {
        let triple = corpus.triple(t);
        self.by_sample[triple.sample.0].push(t);
        self.by_annotator[triple.annotator.0].push(t);
        self.class_counts[triple.label] += 1;
        self.total += 1;
    }
}

/// The pair of pools an experiment mutates, kept in sync.
#[derive(Clone, Debug)]
pub struct Pools {
    pub unlabeled: UnlabeledPool,
    pub labeled: LabeledPool,
}

impl Pools {
    pub fn new(corpus: &Corpus, train: &[SampleIdx]) -> Self {
        Pools {
            unlabeled: UnlabeledPool::new(corpus, train),
            labeled: LabeledPool::new(corpus),
        }
    }

    /// Moves triple `t` from the unlabeled to the labeled pool.
    pub fn consume(&mut self, corpus: &Corpus, t: usize) -> Result<()> {
        let s = corpus.triple(t).sample;
        if !self.unlabeled.take(s, t) {
            return Err(Error::KeyMismatch(format!("triple {t} is not in the unlabeled pool")));
        }
        self.labeled.push(corpus, t);
        Ok(())
    }
}
