//! Browser bindings for a few small ACAL experiments.
//!
//! Every exported function takes and returns JSON strings. The `*_json`
//! wrappers are what the page calls; the typed functions underneath are plain
//! Rust and are what the tests exercise.

use acal_core::embeddings::{annotator_representation, fit_pca};
use acal_core::metrics::js_divergence;
use acal_core::{
    generate_population, run_experiment, AnnotatorIdx, AnnotatorStrategy, ExperimentConfig, MetricReport, Mode, Pools,
    PopulationSpec, SampleIdx, SampleStrategy, Seeds, SoftLabel,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
pub struct LabelQuery {
    /// Votes per class.
    pub counts: Vec<usize>,
    /// Optional distribution to compare the soft label with.
    #[serde(default)]
    pub compare: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct LabelStats {
    pub soft_label: Vec<f64>,
    pub majority: usize,
    /// Nats.
    pub entropy: f64,
    pub max_entropy: f64,
    /// Base 2, present when a comparison distribution was given.
    pub jsd: Option<f64>,
}

pub fn label_stats(query: &LabelQuery) -> Result<LabelStats, String> {
    if query.counts.len() < 2 {
        return Err("need at least two classes".into());
    }
    let total: usize = query.counts.iter().sum();
    if total == 0 {
        return Err("need at least one vote".into());
    }
    let soft = SoftLabel::from_counts(&query.counts);
    let jsd = match &query.compare {
        Some(q) => {
            let q = SoftLabel::new(q.clone()).map_err(|e| format!("compare: {e}"))?;
            Some(js_divergence(soft.probs(), q.probs()).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    Ok(LabelStats {
        majority: soft.majority(),
        entropy: soft.entropy(),
        max_entropy: (query.counts.len() as f64).ln(),
        soft_label: soft.into_inner(),
        jsd,
    })
}

#[derive(Debug, Serialize)]
pub struct MapPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub minority: bool,
    pub annotations: usize,
}

#[derive(Debug, Serialize)]
pub struct AnnotatorMap {
    pub points: Vec<MapPoint>,
    /// Share of variance carried by each plotted axis.
    pub explained: Vec<f64>,
    pub preferred_label: usize,
}

/// Projects every annotator's full-history representation onto the first two
/// principal components.
pub fn annotator_map(spec: &PopulationSpec) -> Result<AnnotatorMap, String> {
    let population = generate_population(spec).map_err(|e| e.to_string())?;
    let corpus = &population.corpus;
    let all: Vec<SampleIdx> = (0..corpus.num_samples()).map(SampleIdx).collect();
    let mut pools = Pools::new(corpus, &all);
    for t in 0..corpus.num_triples() {
        pools.consume(corpus, t).map_err(|e| e.to_string())?;
    }
    let labeled = &pools.labeled;
    let reps = (0..corpus.num_annotators())
        .map(|a| annotator_representation(AnnotatorIdx(a), labeled, corpus, &population.embeddings))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let vectors: Vec<Vec<f64>> = reps.iter().map(|r| r.vector.clone()).collect();
    let pca = fit_pca(&vectors, 2).map_err(|e| e.to_string())?;

    let n = vectors.len() as f64;
    let total_variance: f64 = vectors
        .iter()
        .map(|v| v.iter().zip(&pca.mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let explained = pca
        .eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();

    let mut points = Vec::with_capacity(reps.len());
    for (rep, v) in reps.iter().zip(&vectors) {
        let p = pca.project(v).map_err(|e| e.to_string())?;
        let id = corpus.annotator(rep.annotator).id.clone();
        points.push(MapPoint {
            minority: population.minority_annotators.contains(&id),
            x: p.first().copied().unwrap_or(0.0),
            y: p.get(1).copied().unwrap_or(0.0),
            annotations: rep.history_size,
            id,
        });
    }
    Ok(AnnotatorMap {
        points,
        explained,
        preferred_label: population.preferred_label,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    pub population: PopulationSpec,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Fraction of all training annotations spent across the run.
    #[serde(default = "default_budget")]
    pub budget_fraction: f64,
    #[serde(default = "default_epochs")]
    pub epochs_per_round: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_sampling")]
    pub sample_strategy: SampleStrategy,
    #[serde(default)]
    pub seed: u64,
}

fn default_iterations() -> usize {
    5
}
fn default_budget() -> f64 {
    0.3
}
fn default_epochs() -> usize {
    20
}
fn default_lr() -> f64 {
    0.5
}
fn default_sampling() -> SampleStrategy {
    SampleStrategy::Random
}

#[derive(Debug, Serialize, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub budget: usize,
    pub js: f64,
    pub js_w: f64,
}

#[derive(Debug, Serialize)]
pub struct StrategyCurve {
    pub label: String,
    pub curve: Vec<CurvePoint>,
    /// Test metrics of the final model.
    pub test: MetricReport,
}

#[derive(Debug, Serialize)]
pub struct CurveComparison {
    pub total_train_annotations: usize,
    pub batch_size: usize,
    pub strategies: Vec<StrategyCurve>,
}

/// Runs every annotator strategy on one synthetic population with the same
/// split, batch size and seeds.
pub fn compare_strategies(request: &CurveRequest) -> Result<CurveComparison, String> {
    if !(request.budget_fraction > 0.0 && request.budget_fraction <= 1.0) {
        return Err(format!(
            "budget_fraction must be in (0, 1], got {}",
            request.budget_fraction
        ));
    }
    if request.iterations == 0 {
        return Err("iterations must be at least 1".into());
    }
    let population = generate_population(&request.population).map_err(|e| e.to_string())?;
    let corpus = &population.corpus;
    let emb = &population.embeddings;
    let seeds = Seeds::all(request.seed);
    let train = acal_core::split_corpus(corpus, seeds.split)
        .map_err(|e| e.to_string())?
        .train;
    let total = corpus.annotation_count(&train);
    // warmup plus `iterations` rounds of `b` annotations each
    let b = ((total as f64 * request.budget_fraction) / (request.iterations + 1) as f64)
        .floor()
        .max(1.0) as usize;

    let mut base = ExperimentConfig {
        mode: Mode::Acal,
        sample_strategy: request.sample_strategy,
        batch_size: Some(b),
        num_iterations: request.iterations,
        epochs_per_round: request.epochs_per_round,
        seeds,
        ..ExperimentConfig::default()
    };
    base.optimizer.learning_rate = request.learning_rate;
    base.optimizer.batch_size = 32;
    base.optimizer.weight_decay = 0.0;

    let mut strategies = Vec::new();
    for strategy in AnnotatorStrategy::ALL {
        let config = ExperimentConfig {
            annotator_strategy: Some(strategy),
            ..base.clone()
        };
        config.validate().map_err(|e| e.to_string())?;
        let outcome = run_experiment(&config, corpus, emb).map_err(|e| e.to_string())?;
        let last = outcome.logs.last().ok_or("run produced no iterations")?;
        let test =
            acal_core::metrics::evaluate(&outcome.checkpoints[last.checkpoint], &outcome.split.test, corpus, emb)
                .map_err(|e| e.to_string())?;
        strategies.push(StrategyCurve {
            label: config.strategy_label(),
            curve: outcome
                .logs
                .iter()
                .map(|l| CurvePoint {
                    iteration: l.iteration,
                    budget: l.budget,
                    js: l.validation.js,
                    js_w: l.validation.js_w,
                })
                .collect(),
            test,
        });
    }
    Ok(CurveComparison {
        total_train_annotations: total,
        batch_size: b,
        strategies,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))
}

fn emit<T: Serialize>(value: Result<T, String>) -> Result<String, String> {
    value.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

#[wasm_bindgen]
pub fn label_stats_json(request: &str) -> Result<String, String> {
    emit(parse(request).and_then(|q| label_stats(&q)))
}

#[wasm_bindgen]
pub fn annotator_map_json(spec: &str) -> Result<String, String> {
    emit(parse(spec).and_then(|s| annotator_map(&s)))
}

#[wasm_bindgen]
pub fn compare_strategies_json(request: &str) -> Result<String, String> {
    emit(parse(request).and_then(|r| compare_strategies(&r)))
}
