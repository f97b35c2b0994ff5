use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use acal_core::experiment::RunOutcome;
use acal_core::metrics::MetricReport;
use acal_core::model::Checkpoint;
use acal_core::report::{average, comparison_csv, comparison_text, write_iteration_csv, AveragedSummary, RunSummary};
use acal_core::synth::write_population;
use acal_core::{generate_population, load_corpus, load_embeddings, run_experiment, ExperimentConfig, PopulationSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SeedSpec};
use crate::error::{io_failure, CliError};

pub const SUMMARY_FILE: &str = "summary.json";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Top-level `summary.json` of a `run` output directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSetSummary {
    pub label: String,
    pub config: RunConfig,
    pub runs: Vec<RunSummary>,
    pub average: AveragedSummary,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(|e| CliError::Failure(e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| io_failure(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Failure(e.to_string()))
}

struct SeedRun {
    config: ExperimentConfig,
    outcome: RunOutcome,
    test: MetricReport,
}

pub fn run(config_path: &Path, out: &Path, seeds: Option<Vec<SeedSpec>>, jobs: Option<usize>) -> Result<(), CliError> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seeds) = seeds {
        if seeds.is_empty() {
            return Err(CliError::Validation("--seeds: at least one seed is required".into()));
        }
        config.seeds = seeds;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let label_space = config.label_space.build()?;
    let texts = config.texts.as_ref().map(|t| config.resolve(base, t));
    let corpus = load_corpus(
        &config.resolve(base, &config.annotations),
        label_space,
        texts.as_deref(),
    )?;
    let emb = load_embeddings(&config.resolve(base, &config.embeddings), corpus.sample_ids())?;
    if let Some(dim) = config.embedding_dim {
        if dim != emb.dim() {
            return Err(CliError::Validation(format!(
                "embedding_dim: config says {dim}, embeddings file has {}",
                emb.dim()
            )));
        }
    }

    let runs: Vec<SeedRun> = thread_pool(jobs)?.install(|| {
        config
            .seeds
            .par_iter()
            .map(|spec| {
                let experiment = ExperimentConfig {
                    seeds: spec.seeds(),
                    ..config.experiment.clone()
                };
                let outcome = run_experiment(&experiment, &corpus, &emb)?;
                let test = outcome.evaluate_test(&corpus, &emb)?;
                Ok(SeedRun {
                    config: experiment,
                    outcome,
                    test,
                })
            })
            .collect::<Result<_, CliError>>()
    })?;

    create_dir(out)?;
    let mut summaries = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        let dir = out.join(format!("run_{k}"));
        create_dir(&dir)?;
        let csv_path = dir.join(ITERATIONS_FILE);
        let file = File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
        write_iteration_csv(&run.outcome.logs, BufWriter::new(file))?;
        let summary = RunSummary::new(&run.config, &run.outcome, run.test.clone());
        write_json(&dir.join(SUMMARY_FILE), &summary)?;
        write_json(
            &dir.join(CHECKPOINT_FILE),
            &Checkpoint::new(run.outcome.best_checkpoint(), &run.config.train_config()),
        )?;
        summaries.push(summary);
    }
    let averaged = average(&summaries)?;
    print!("{}", comparison_text(std::slice::from_ref(&averaged)));
    write_json(
        &out.join(SUMMARY_FILE),
        &RunSetSummary {
            label: averaged.label.clone(),
            config,
            runs: summaries,
            average: averaged,
        },
    )
}

pub fn synth(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path).map_err(|e| io_failure(spec_path, e))?;
    let spec: PopulationSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", spec_path.display())))?;
    let population = generate_population(&spec)?;
    write_population(&population, out)?;
    println!(
        "wrote {} samples, {} annotators, {} annotations to {}",
        population.corpus.num_samples(),
        population.corpus.num_annotators(),
        population.corpus.num_triples(),
        out.display()
    );
    Ok(())
}

pub fn load_run_set(dir: &Path) -> Result<RunSetSummary, CliError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Failure(format!(
            "{}: {e} (expected the output directory of `acal run`)",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn report(dirs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let rows = dirs
        .iter()
        .map(|d| load_run_set(d).map(|s| s.average))
        .collect::<Result<Vec<_>, _>>()?;
    let csv = comparison_csv(&rows)?;
    print!("{}", comparison_text(&rows));
    match out {
        Some(path) => fs::write(path, csv).map_err(|e| io_failure(path, e)),
        None => {
            println!();
            print!("{csv}");
            Ok(())
        }
    }
}
