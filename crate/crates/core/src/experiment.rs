//! Experiment loops: passive learning, oracle active learning and
//! annotator-centric active learning, with budget accounting and
//! validation-based checkpoint selection.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotators::{select_annotator, AnnotatorStrategy, PoolView};
use crate::corpus::{split_corpus, Corpus, SampleIdx, SoftLabel, SplitSpec};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::metrics::{self, entropy_alignment, EntropyAlignment, MetricReport, ENTROPY_EDGES};
use crate::model::{Example, SoftmaxClassifier, TrainConfig};
use crate::pool::{LabeledPool, Pools};
use crate::sampling::{batch_size, select_random, select_uncertainty, SampleStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Passive,
    AlOracle,
    Acal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Passive => "passive",
            Mode::AlOracle => "al_oracle",
            Mode::Acal => "acal",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub model: u64,
    pub strategy: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            split: seed,
            model: seed,
            strategy: seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-5,
            batch_size: 128,
            weight_decay: 0.01,
        }
    }
}

impl OptimizerConfig {
    fn train_config(&self, epochs: usize, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            shuffle_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassiveConfig {
    pub optimizer: OptimizerConfig,
    pub max_epochs: usize,
    /// Epochs without validation-JS improvement before stopping.
    pub patience: usize,
}

impl Default for PassiveConfig {
    fn default() -> Self {
        PassiveConfig {
            optimizer: OptimizerConfig {
                learning_rate: 1e-4,
                ..OptimizerConfig::default()
            },
            max_epochs: 50,
            patience: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub sample_strategy: SampleStrategy,
    /// Required for `acal`, ignored otherwise.
    pub annotator_strategy: Option<AnnotatorStrategy>,
    /// Overrides the 5% batch rule.
    pub batch_size: Option<usize>,
    pub num_iterations: usize,
    pub epochs_per_round: usize,
    /// Continue from the current parameters each round instead of re-initializing.
    pub warm_start: bool,
    pub optimizer: OptimizerConfig,
    pub passive: PassiveConfig,
    pub seeds: Seeds,
    /// Entropy bin edges (nats) for the alignment analysis.
    pub entropy_edges: (f64, f64),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Acal,
            sample_strategy: SampleStrategy::Random,
            annotator_strategy: Some(AnnotatorStrategy::Random),
            batch_size: None,
            num_iterations: 10,
            epochs_per_round: 20,
            warm_start: true,
            optimizer: OptimizerConfig::default(),
            passive: PassiveConfig::default(),
            seeds: Seeds::all(0),
            entropy_edges: ENTROPY_EDGES,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Acal && self.annotator_strategy.is_none() {
            return Err(Error::Config("annotator_strategy is required in acal mode".into()));
        }
        if self.num_iterations == 0 {
            return Err(Error::Config("num_iterations must be at least 1".into()));
        }
        if self.epochs_per_round == 0 {
            return Err(Error::Config("epochs_per_round must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.passive.max_epochs == 0 || self.passive.patience == 0 {
            return Err(Error::Config(
                "passive.max_epochs and passive.patience must be at least 1".into(),
            ));
        }
        let (lo, hi) = self.entropy_edges;
        if !(0.0 <= lo && lo < hi) {
            return Err(Error::Config(format!(
                "entropy_edges must satisfy 0 <= lo < hi, got ({lo}, {hi})"
            )));
        }
        self.optimizer.train_config(1, 0).validate()?;
        self.passive.optimizer.train_config(1, 0).validate()
    }

    /// Per-round training settings. `shuffle_seed` is the base seed; each
    /// round or epoch derives its own from it.
    pub fn train_config(&self) -> TrainConfig {
        match self.mode {
            Mode::Passive => self.passive.optimizer.train_config(1, self.seeds.model),
            _ => self.optimizer.train_config(self.epochs_per_round, self.seeds.model),
        }
    }

    /// Short label such as `random+label_minority`, `random+oracle` or `passive`.
    pub fn strategy_label(&self) -> String {
        match self.mode {
            Mode::Passive => "passive".into(),
            Mode::AlOracle => format!("{}+oracle", self.sample_strategy),
            Mode::Acal => format!(
                "{}+{}",
                self.sample_strategy,
                self.annotator_strategy.map_or("?", AnnotatorStrategy::token)
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub consumed_per_iteration: Vec<usize>,
    pub cumulative: usize,
}

impl BudgetLedger {
    pub fn record(&mut self, consumed: usize) {
        self.consumed_per_iteration.push(consumed);
        self.cumulative += consumed;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    /// 0 is the warmup round (AL modes); epochs count from 1 in passive mode.
    pub iteration: usize,
    pub budget: usize,
    pub validation: MetricReport,
    pub alignment: EntropyAlignment,
    /// Index into [`RunOutcome::checkpoints`].
    pub checkpoint: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSelection {
    pub best_iteration: usize,
    pub best_validation_js: f64,
    pub budget_at_best: usize,
    /// Position of the selected entry in the log.
    pub log_index: usize,
}

/// Entry with the lowest validation JS; ties go to the earliest entry.
pub fn select_best_checkpoint(logs: &[IterationLog]) -> Result<CheckpointSelection> {
    let (log_index, best) = logs
        .iter()
        .enumerate()
        .reduce(|best, cur| {
            if cur.1.validation.js < best.1.validation.js {
                cur
            } else {
                best
            }
        })
        .ok_or(Error::EmptyLog)?;
    Ok(CheckpointSelection {
        best_iteration: best.iteration,
        best_validation_js: best.validation.js,
        budget_at_best: best.budget,
        log_index,
    })
}

/// Relative budget change against passive learning, in percent. Negative means savings.
pub fn budget_delta(budget_at_best: usize, total_annotations: usize) -> f64 {
    100.0 * (budget_at_best as f64 - total_annotations as f64) / total_annotations as f64
}

/// Consumes `min(b, remaining)` triples drawn uniformly from all unconsumed
/// training triples. Returns the consumed triples in draw order.
pub fn warmup<R: Rng + ?Sized>(pools: &mut Pools, corpus: &Corpus, b: usize, rng: &mut R) -> Result<Vec<usize>> {
    let remaining = pools.unlabeled.remaining_triples();
    if remaining.is_empty() {
        return Err(Error::EmptyPool);
    }
    let picked: Vec<usize> = index::sample(rng, remaining.len(), b.min(remaining.len()))
        .into_iter()
        .map(|i| remaining[i])
        .collect();
    for &t in &picked {
        pools.consume(corpus, t)?;
    }
    Ok(picked)
}

/// Aggregated targets over consumed annotations, one per labeled sample, sorted.
pub fn training_targets(labeled: &LabeledPool, corpus: &Corpus) -> Result<Vec<(SampleIdx, SoftLabel)>> {
    labeled
        .labeled_samples()
        .into_iter()
        .map(|s| Ok((s, labeled.soft_label(corpus, s)?)))
        .collect()
}

fn train_on(
    classifier: SoftmaxClassifier,
    targets: &[(SampleIdx, SoftLabel)],
    emb: &EmbeddingMatrix,
    config: &TrainConfig,
) -> SoftmaxClassifier {
    let data: Vec<Example> = targets.iter().map(|(s, t)| Example::new(emb.row(*s), t)).collect();
    classifier.train(&data, config)
}

fn round_seed(base: u64, round: usize) -> u64 {
    base ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub mode: Mode,
    pub split: SplitSpec,
    pub batch_size: usize,
    pub total_train_annotations: usize,
    pub logs: Vec<IterationLog>,
    pub checkpoints: Vec<SoftmaxClassifier>,
    pub selection: CheckpointSelection,
    pub ledger: BudgetLedger,
    /// Every consumed triple, in consumption order.
    pub consumed: Vec<usize>,
    pub final_pools: Pools,
}

impl RunOutcome {
    pub fn best_checkpoint(&self) -> &SoftmaxClassifier {
        &self.checkpoints[self.logs[self.selection.log_index].checkpoint]
    }

    /// Test metrics of the selected checkpoint.
    pub fn evaluate_test(&self, corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<MetricReport> {
        metrics::evaluate(self.best_checkpoint(), &self.split.test, corpus, emb)
    }

    pub fn delta_pct(&self) -> f64 {
        budget_delta(self.selection.budget_at_best, self.total_train_annotations)
    }
}

fn check_inputs(config: &ExperimentConfig, corpus: &Corpus, emb: &EmbeddingMatrix, mode: Mode) -> Result<()> {
    config.validate()?;
    if config.mode != mode {
        return Err(Error::Config(format!(
            "expected mode {mode}, config has {}",
            config.mode
        )));
    }
    if !emb.is_aligned_with(corpus) {
        return Err(Error::Config("embedding rows do not match the corpus samples".into()));
    }
    Ok(())
}

struct Recorder<'a> {
    corpus: &'a Corpus,
    emb: &'a EmbeddingMatrix,
    val: &'a [SampleIdx],
    edges: (f64, f64),
    logs: Vec<IterationLog>,
    checkpoints: Vec<SoftmaxClassifier>,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        iteration: usize,
        budget: usize,
        classifier: &SoftmaxClassifier,
        labeled: &LabeledPool,
    ) -> Result<()> {
        let validation = metrics::evaluate(classifier, self.val, self.corpus, self.emb)?;
        let alignment = entropy_alignment(labeled, self.corpus, self.edges)?;
        self.checkpoints.push(classifier.clone());
        self.logs.push(IterationLog {
            iteration,
            budget,
            validation,
            alignment,
            checkpoint: self.checkpoints.len() - 1,
        });
        Ok(())
    }
}

/// Shared body of the two active-learning loops.
fn run_active(config: &ExperimentConfig, corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<RunOutcome> {
    let split = split_corpus(corpus, config.seeds.split)?;
    let total_train_annotations = corpus.annotation_count(&split.train);
    let b = config
        .batch_size
        .unwrap_or_else(|| batch_size(corpus.num_triples(), split.train.len()));
    let mut pools = Pools::new(corpus, &split.train);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.strategy);
    let fresh = || SoftmaxClassifier::new(emb.dim(), corpus.num_classes(), config.seeds.model);
    let mut classifier = fresh();
    let mut ledger = BudgetLedger::default();
    let mut recorder = Recorder {
        corpus,
        emb,
        val: &split.val,
        edges: config.entropy_edges,
        logs: Vec::new(),
        checkpoints: Vec::new(),
    };

    let mut consumed = warmup(&mut pools, corpus, b, &mut rng)?;
    ledger.record(consumed.len());

    for round in 0..=config.num_iterations {
        if round > 0 {
            if pools.unlabeled.is_empty() {
                break;
            }
            let batch = match config.sample_strategy {
                SampleStrategy::Random => select_random(&pools.unlabeled, b, &mut rng)?,
                SampleStrategy::Uncertainty => select_uncertainty(&pools.unlabeled, b, &classifier, emb)?,
            };
            let before = consumed.len();
            for s in batch.samples {
                match config.mode {
                    Mode::Acal => {
                        let strategy = config.annotator_strategy.expect("validated");
                        let choice = select_annotator(strategy, s, &PoolView::new(corpus, emb, &pools), &mut rng)?;
                        let t = pools
                            .unlabeled
                            .triple_of(corpus, s, choice.annotator)
                            .expect("chosen annotator is available");
                        pools.consume(corpus, t)?;
                        consumed.push(t);
                    }
                    _ => {
                        for t in pools.unlabeled.remaining(s).to_vec() {
                            pools.consume(corpus, t)?;
                            consumed.push(t);
                        }
                    }
                }
            }
            ledger.record(consumed.len() - before);
        }

        if !config.warm_start {
            classifier = fresh();
        }
        let targets = training_targets(&pools.labeled, corpus)?;
        let train = config
            .optimizer
            .train_config(config.epochs_per_round, round_seed(config.seeds.model, round));
        classifier = train_on(classifier, &targets, emb, &train);
        recorder.record(round, ledger.cumulative, &classifier, &pools.labeled)?;
    }

    let Recorder { logs, checkpoints, .. } = recorder;
    let selection = select_best_checkpoint(&logs)?;
    Ok(RunOutcome {
        mode: config.mode,
        split,
        batch_size: b,
        total_train_annotations,
        logs,
        checkpoints,
        selection,
        ledger,
        consumed,
        final_pools: pools,
    })
}

/// Annotator-centric active learning: each round selects samples, then one
/// annotator per sample, and retrains on everything collected.
pub fn run_acal(config: &ExperimentConfig, corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<RunOutcome> {
    check_inputs(config, corpus, emb, Mode::Acal)?;
    run_active(config, corpus, emb)
}

/// Oracle active learning: each selected sample receives all of its remaining
/// annotations at once.
pub fn run_al_oracle(config: &ExperimentConfig, corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<RunOutcome> {
    check_inputs(config, corpus, emb, Mode::AlOracle)?;
    run_active(config, corpus, emb)
}

/// Passive learning on every training annotation, one log entry per epoch,
/// with early stopping on validation JS.
pub fn run_passive(config: &ExperimentConfig, corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<RunOutcome> {
    check_inputs(config, corpus, emb, Mode::Passive)?;
    let split = split_corpus(corpus, config.seeds.split)?;
    let mut pools = Pools::new(corpus, &split.train);
    let consumed = pools.unlabeled.remaining_triples();
    for &t in &consumed {
        pools.consume(corpus, t)?;
    }
    let mut ledger = BudgetLedger::default();
    ledger.record(consumed.len());
    let total = consumed.len();

    let targets = training_targets(&pools.labeled, corpus)?;
    let mut classifier = SoftmaxClassifier::new(emb.dim(), corpus.num_classes(), config.seeds.model);
    let mut recorder = Recorder {
        corpus,
        emb,
        val: &split.val,
        edges: config.entropy_edges,
        logs: Vec::new(),
        checkpoints: Vec::new(),
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 1..=config.passive.max_epochs {
        let train = config
            .passive
            .optimizer
            .train_config(1, round_seed(config.seeds.model, epoch));
        classifier = train_on(classifier, &targets, emb, &train);
        recorder.record(epoch, total, &classifier, &pools.labeled)?;
        let js = recorder.logs.last().expect("just recorded").validation.js;
        if js < best {
            best = js;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.passive.patience {
                break;
            }
        }
    }

    let Recorder { logs, checkpoints, .. } = recorder;
    let selection = select_best_checkpoint(&logs)?;
    Ok(RunOutcome {
        mode: Mode::Passive,
        split,
        batch_size: total,
        total_train_annotations: total,
        logs,
        checkpoints,
        selection,
        ledger,
        consumed,
        final_pools: pools,
    })
}

pub fn run_experiment(config: &ExperimentConfig, corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<RunOutcome> {
    match config.mode {
        Mode::Passive => run_passive(config, corpus, emb),
        Mode::AlOracle => run_al_oracle(config, corpus, emb),
        Mode::Acal => run_acal(config, corpus, emb),
    }
}
