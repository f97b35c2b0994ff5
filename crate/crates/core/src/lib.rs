//! Annotator-centric active learning simulation.
//!
//! Given unaggregated per-annotator labels and fixed sample embeddings, the
//! crate runs active-learning loops that choose both which samples to
//! annotate and which annotator labels each one, trains a soft-label softmax
//! classifier on what was collected, and scores it with metrics that look at
//! individual annotators as well as the aggregate.

pub mod annotators;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod pool;
pub mod report;
pub mod sampling;
pub mod synth;

pub use annotators::{AnnotatorChoice, AnnotatorStrategy, PoolView};
pub use corpus::{load_corpus, split_corpus, AnnotatorIdx, Corpus, LabelSpace, SampleIdx, SoftLabel, SplitSpec};
pub use embeddings::{load_embeddings, EmbeddingMatrix};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, Mode, RunOutcome, Seeds};
pub use metrics::{EntropyAlignment, MetricReport};
pub use model::{SoftmaxClassifier, TrainConfig};
pub use pool::{LabeledPool, Pools, UnlabeledPool};
pub use sampling::SampleStrategy;
pub use synth::{generate_population, PopulationSpec, SyntheticPopulation};
