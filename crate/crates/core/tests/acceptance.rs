//! Acceptance suite. Runs every check, prints one PASS/FAIL line each, and
//! exits non-zero if any failed.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use acal_core::annotators::select_annotator;
use acal_core::corpus::{annotation_entropy, RawAnnotation};
use acal_core::experiment::{training_targets, OptimizerConfig, PassiveConfig};
use acal_core::metrics::{entropy_bin, evaluate, js_divergence, worst_off, worst_off_count, Direction, ENTROPY_EDGES};
use acal_core::model::Example;
use acal_core::report::write_iteration_csv;
use acal_core::sampling::{batch_size, select_uncertainty};
use acal_core::{
    generate_population, run_experiment, split_corpus, AnnotatorStrategy, Corpus, ExperimentConfig, LabelSpace, Mode,
    PoolView, PopulationSpec, SampleIdx, SampleStrategy, Seeds, SoftmaxClassifier,
};
use common::{entropy_nats, jsd_bits, linear_probs, random_embeddings, random_simplex, raw, PoolState};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn aggregation_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_entropy = 0.0f64;
    let mut worst_jsd = 0.0f64;
    for _ in 0..500 {
        let c = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=30);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let rows: Vec<RawAnnotation> = labels.iter().enumerate().map(|(a, &l)| raw(0, a, l)).collect();
        let corpus = Corpus::from_annotations(LabelSpace::numbered(c).unwrap(), rows).unwrap();
        let soft = corpus.aggregate_soft_label("s000").unwrap();

        let mut counts = vec![0usize; c];
        labels.iter().for_each(|&l| counts[l] += 1);
        let brute: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
        if soft.probs() != brute.as_slice() {
            return outcome(false, format!("soft label {:?} != counts {brute:?}", soft.probs()));
        }
        worst_entropy = worst_entropy.max((annotation_entropy(soft.probs()) - entropy_nats(&brute)).abs());
        worst_entropy = worst_entropy.max((soft.entropy() - entropy_nats(&brute)).abs());
        let q = random_simplex(&mut rng, c);
        worst_jsd = worst_jsd.max((js_divergence(soft.probs(), &q).unwrap() - jsd_bits(&brute, &q)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst_entropy <= 1e-12 && worst_jsd <= 1e-12 && within(elapsed, Duration::from_secs(1)),
        format!("500 multisets exact; max entropy err {worst_entropy:.1e}, max JSD err {worst_jsd:.1e}, {elapsed:.2?}"),
    )
}

fn hand_loss(weights: &[f64], bias: &[f64], batch: &[(Vec<f64>, Vec<f64>)], wd: f64) -> f64 {
    let mut total = 0.0;
    for (x, t) in batch {
        let p = linear_probs(weights, bias, x);
        for c in 0..p.len() {
            if t[c] > 0.0 {
                total -= t[c] * p[c].ln();
            }
        }
    }
    total / batch.len() as f64 + 0.5 * wd * weights.iter().map(|w| w * w).sum::<f64>()
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.gen_range(1..=8);
        let c = rng.gen_range(2..=4);
        let weights: Vec<f64> = (0..c * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wd = rng.gen_range(0.0..0.1);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..rng.gen_range(1..=10))
            .map(|_| {
                (
                    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    random_simplex(&mut rng, c),
                )
            })
            .collect();
        let targets: Vec<acal_core::SoftLabel> = batch
            .iter()
            .map(|(_, t)| acal_core::SoftLabel::new(t.clone()).unwrap())
            .collect();
        let examples: Vec<Example> = batch
            .iter()
            .zip(&targets)
            .map(|((x, _), t)| Example::new(x, t))
            .collect();
        let model = SoftmaxClassifier::from_parameters(d, c, weights.clone(), bias.clone()).unwrap();
        let analytic = model.gradient(&examples, wd);

        let mut compare = |a: f64, n: f64| {
            let scale = a.abs().max(n.abs());
            let err = if scale > 1e-7 {
                (a - n).abs() / scale
            } else {
                (a - n).abs()
            };
            worst = worst.max(err);
        };
        for i in 0..weights.len() {
            let mut plus = weights.clone();
            let mut minus = weights.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let numeric = (hand_loss(&plus, &bias, &batch, wd) - hand_loss(&minus, &bias, &batch, wd)) / (2.0 * eps);
            compare(analytic.weights[i], numeric);
        }
        for i in 0..c {
            let mut plus = bias.clone();
            let mut minus = bias.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let numeric =
                (hand_loss(&weights, &plus, &batch, wd) - hand_loss(&weights, &minus, &batch, wd)) / (2.0 * eps);
            compare(analytic.bias[i], numeric);
        }
        if (model.loss(&examples, wd) - hand_loss(&weights, &bias, &batch, wd)).abs() > 1e-12 {
            return outcome(false, "library loss disagrees with the reference loss");
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && within(elapsed, Duration::from_secs(5)),
        format!("20 instances; max relative error {worst:.1e}, {elapsed:.2?}"),
    )
}

fn strategy_oracles() -> Outcome {
    let start = Instant::now();
    let mut checked = [0usize; 4];
    let mut scored_by_pca = 0;
    for k in 0..200u64 {
        let state = PoolState::random(1000 + k, 20, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let selectable = state.selectable();
        let query = selectable[rng.gen_range(0..selectable.len())];
        let view = PoolView::new(&state.corpus, &state.emb, &state.pools);

        for (i, strategy) in [
            AnnotatorStrategy::LabelMinority,
            AnnotatorStrategy::SemanticDiversity,
            AnnotatorStrategy::RepresentationDiversity,
        ]
        .into_iter()
        .enumerate()
        {
            let mut lib_rng = ChaCha8Rng::seed_from_u64(k * 7 + i as u64);
            let mut ref_rng = lib_rng.clone();
            let choice = select_annotator(strategy, SampleIdx(query), &view, &mut lib_rng).unwrap();
            if strategy == AnnotatorStrategy::RepresentationDiversity && choice.score.is_some() {
                scored_by_pca += 1;
            }
            let got = choice.annotator.0;
            let want = match strategy {
                AnnotatorStrategy::LabelMinority => state.oracle_label_minority(query, &mut ref_rng),
                AnnotatorStrategy::SemanticDiversity => state.oracle_semantic(query, &mut ref_rng),
                _ => state.oracle_representation(query, &mut ref_rng),
            };
            if got != want || lib_rng.next_u64() != ref_rng.next_u64() {
                return outcome(
                    false,
                    format!("{strategy} differs on state {k}: library {got}, reference {want}"),
                );
            }
            checked[i + 1] += 1;
        }

        let (d, c) = (state.emb.dim(), state.num_classes());
        let weights: Vec<f64> = (0..c * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bias: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = SoftmaxClassifier::from_parameters(d, c, weights.clone(), bias.clone()).unwrap();
        let b = rng.gen_range(1..=selectable.len());
        let got: Vec<usize> = select_uncertainty(&state.pools.unlabeled, b, &model, &state.emb)
            .unwrap()
            .samples
            .into_iter()
            .map(|s| s.0)
            .collect();
        if got != state.oracle_uncertainty(&weights, &bias, b) {
            return outcome(false, format!("uncertainty sampling differs on state {k}"));
        }
        checked[0] += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        within(elapsed, Duration::from_secs(30)),
        format!(
            "200 pool states; S_U/T_L/T_S/T_D agree {checked:?} ({scored_by_pca} T_D decisions through PCA), {elapsed:.2?}"
        ),
    )
}

fn small_population(seed: u64) -> acal_core::SyntheticPopulation {
    generate_population(&PopulationSpec {
        n_samples: 40,
        n_annotators: 12,
        annotations_per_sample: 4,
        num_classes: 3,
        embedding_dim: 5,
        minority_fraction: 0.25,
        minority_label_bias: 0.8,
        agreement_temperature: 1.0,
        embedding_correlation: 0.5,
        preferred_label: None,
        preferred_label_offset: 0.0,
        seed,
    })
    .unwrap()
}

fn fast_config(mode: Mode, seed: u64) -> ExperimentConfig {
    let optimizer = OptimizerConfig {
        learning_rate: 0.3,
        batch_size: 8,
        weight_decay: 0.0,
    };
    ExperimentConfig {
        mode,
        batch_size: Some(10),
        num_iterations: 4,
        epochs_per_round: 3,
        optimizer: optimizer.clone(),
        passive: PassiveConfig {
            optimizer,
            max_epochs: 10,
            patience: 3,
        },
        seeds: Seeds::all(seed),
        ..ExperimentConfig::default()
    }
}

fn all_configs(seed: u64) -> Vec<ExperimentConfig> {
    let mut configs = vec![fast_config(Mode::Passive, seed)];
    for sample_strategy in [SampleStrategy::Random, SampleStrategy::Uncertainty] {
        configs.push(ExperimentConfig {
            sample_strategy,
            annotator_strategy: None,
            ..fast_config(Mode::AlOracle, seed)
        });
        for strategy in AnnotatorStrategy::ALL {
            configs.push(ExperimentConfig {
                sample_strategy,
                annotator_strategy: Some(strategy),
                ..fast_config(Mode::Acal, seed)
            });
        }
    }
    configs
}

fn budget_conservation() -> Outcome {
    let pop = small_population(3);
    let mut runs = 0;
    for config in all_configs(5) {
        let out = run_experiment(&config, &pop.corpus, &pop.embeddings).unwrap();
        let distinct: BTreeSet<usize> = out.consumed.iter().copied().collect();
        let conserved = out.ledger.cumulative == out.consumed.len()
            && distinct.len() == out.consumed.len()
            && out.final_pools.labeled.len() == out.consumed.len()
            && out.ledger.consumed_per_iteration.iter().sum::<usize>() == out.ledger.cumulative
            && out.logs.last().unwrap().budget == out.ledger.cumulative
            && out.logs.windows(2).all(|w| w[0].budget <= w[1].budget);
        if !conserved {
            return outcome(false, format!("ledger mismatch for {}", config.strategy_label()));
        }
        runs += 1;
    }

    let passive = run_experiment(&fast_config(Mode::Passive, 5), &pop.corpus, &pop.embeddings).unwrap();
    let passive_targets = training_targets(&passive.final_pools.labeled, &pop.corpus).unwrap();
    let mut worst = 0.0f64;
    for strategy in AnnotatorStrategy::ALL {
        let config = ExperimentConfig {
            annotator_strategy: Some(strategy),
            num_iterations: 1000,
            epochs_per_round: 1,
            ..fast_config(Mode::Acal, 5)
        };
        let out = run_experiment(&config, &pop.corpus, &pop.embeddings).unwrap();
        if !out.final_pools.unlabeled.is_empty() {
            return outcome(false, format!("{strategy} did not exhaust the pool"));
        }
        let targets = training_targets(&out.final_pools.labeled, &pop.corpus).unwrap();
        if targets.len() != passive_targets.len() {
            return outcome(false, "exhausted ACAL covers a different sample set than passive");
        }
        for ((s, t), (ps, pt)) in targets.iter().zip(&passive_targets) {
            if s != ps {
                return outcome(false, "exhausted ACAL covers a different sample set than passive");
            }
            for (a, b) in t.probs().iter().zip(pt.probs()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{runs} runs conserve budget; exhausted ACAL vs passive targets max diff {worst:.1e}"),
    )
}

fn protocol_constants() -> Outcome {
    if batch_size(72_103, 792) != 792 {
        return outcome(false, format!("batch_size(72103, 792) = {}", batch_size(72_103, 792)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..1000 {
        let a = rng.gen_range(1..200_000usize);
        let s = rng.gen_range(1..5_000usize);
        let expected = ((0.05 * a as f64).ceil() as usize).min(s).max(1);
        if batch_size(a, s) != expected {
            return outcome(
                false,
                format!("batch_size({a}, {s}) = {}, expected {expected}", batch_size(a, s)),
            );
        }
    }

    let rows: Vec<RawAnnotation> = (0..1000)
        .flat_map(|s| (0..3).map(move |a| raw(s, a, (s + a) % 2)))
        .collect();
    let corpus = Corpus::from_annotations(LabelSpace::numbered(2).unwrap(), rows).unwrap();
    let split = split_corpus(&corpus, 9).unwrap();
    let sizes = (split.train.len(), split.val.len(), split.test.len());
    let mut all: Vec<usize> = split
        .train
        .iter()
        .chain(&split.val)
        .chain(&split.test)
        .map(|s| s.0)
        .collect();
    all.sort();
    all.dedup();
    if sizes != (800, 100, 100) || all.len() != 1000 {
        return outcome(false, format!("split sizes {sizes:?}, {} distinct samples", all.len()));
    }

    let bins_ok = ENTROPY_EDGES == (0.43, 0.72)
        && entropy_bin(0.4299, ENTROPY_EDGES) == 0
        && entropy_bin(0.43, ENTROPY_EDGES) == 1
        && entropy_bin(0.72, ENTROPY_EDGES) == 1
        && entropy_bin(0.7201, ENTROPY_EDGES) == 2;
    outcome(
        bins_ok,
        format!("batch_size(72103, 792) = 792; split {sizes:?} of 1000 samples; entropy edges {ENTROPY_EDGES:?}"),
    )
}

fn worst_off_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for k in 0..100u64 {
        let n_a = rng.gen_range(2..=30);
        let c = rng.gen_range(2..=4);
        let mut rows = Vec::new();
        for s in 0..30 {
            for a in 0..n_a {
                if rng.gen_bool(0.5) {
                    rows.push(raw(s, a, rng.gen_range(0..c)));
                }
            }
        }
        if rows.is_empty() {
            continue;
        }
        let corpus = Corpus::from_annotations(LabelSpace::numbered(c).unwrap(), rows).unwrap();
        let emb = random_embeddings(&corpus, 4, k);
        let weights: Vec<f64> = (0..c * 4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let model = SoftmaxClassifier::from_parameters(4, c, weights, vec![0.0; c]).unwrap();
        let samples: Vec<SampleIdx> = (0..corpus.num_samples()).map(SampleIdx).collect();
        let report = evaluate(&model, &samples, &corpus, &emb).unwrap();
        if report.f1_w > report.f1_a + 1e-15 || report.js_w < report.js_a - 1e-15 {
            return outcome(false, format!("report {k} violates worst-off ordering: {report:?}"));
        }
    }

    let scores: Vec<f64> = (0..20).map(|_| rng.gen::<f64>()).collect();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let lowest_two = (sorted[0] + sorted[1]) / 2.0;
    let highest_two = (sorted[18] + sorted[19]) / 2.0;
    let exact = worst_off_count(20) == 2
        && worst_off(&scores, Direction::HigherIsBetter).unwrap() == lowest_two
        && worst_off(&scores, Direction::LowerIsBetter).unwrap() == highest_two;
    outcome(exact, "100 random reports ordered; n=20 averages exactly 2 scores")
}

/// Population for the fairness and alignment checks. The preferred label is
/// pushed down in the latent distributions so that it is actually the rarest
/// label among majority annotators.
fn fairness_population(seed: u64) -> acal_core::SyntheticPopulation {
    generate_population(&PopulationSpec {
        n_samples: 1000,
        n_annotators: 100,
        annotations_per_sample: 20,
        num_classes: 3,
        embedding_dim: 16,
        minority_fraction: 0.2,
        minority_label_bias: 0.9,
        agreement_temperature: 1.0,
        embedding_correlation: 0.8,
        preferred_label: None,
        preferred_label_offset: -2.0,
        seed,
    })
    .unwrap()
}

fn fairness_config(mode: Mode, strategy: Option<AnnotatorStrategy>, seed: u64) -> ExperimentConfig {
    let optimizer = OptimizerConfig {
        learning_rate: 0.5,
        batch_size: 32,
        weight_decay: 0.0,
    };
    ExperimentConfig {
        mode,
        sample_strategy: SampleStrategy::Random,
        annotator_strategy: strategy,
        batch_size: None,
        num_iterations: 5,
        epochs_per_round: 20,
        warm_start: true,
        optimizer: optimizer.clone(),
        passive: PassiveConfig {
            optimizer,
            max_epochs: 50,
            patience: 3,
        },
        seeds: Seeds::all(seed),
        ..ExperimentConfig::default()
    }
}

struct FairnessRuns {
    lines: Vec<String>,
    lower_js_w: usize,
    js_gap: f64,
    budget_ok: bool,
    alignment: Vec<(AnnotatorStrategy, u64, f64, f64)>,
    elapsed: Duration,
}

fn fairness_runs() -> FairnessRuns {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut lower_js_w = 0;
    let mut label_js = 0.0;
    let mut passive_js = 0.0;
    let mut budget_ok = true;
    let mut alignment = Vec::new();
    for seed in 0..3u64 {
        let pop = fairness_population(seed);
        let passive = run_experiment(
            &fairness_config(Mode::Passive, None, seed),
            &pop.corpus,
            &pop.embeddings,
        )
        .unwrap();
        passive_js += passive.evaluate_test(&pop.corpus, &pop.embeddings).unwrap().js / 3.0;

        let mut at_budget = Vec::new();
        for strategy in [
            AnnotatorStrategy::Random,
            AnnotatorStrategy::LabelMinority,
            AnnotatorStrategy::SemanticDiversity,
        ] {
            let out = run_experiment(
                &fairness_config(Mode::Acal, Some(strategy), seed),
                &pop.corpus,
                &pop.embeddings,
            )
            .unwrap();
            // matched budget: 30% of the training annotations
            budget_ok &= out.ledger.cumulative * 10 == out.total_train_annotations * 3;
            let last = out.checkpoints.last().unwrap();
            let report = evaluate(last, &out.split.test, &pop.corpus, &pop.embeddings).unwrap();
            let first = out.logs.first().unwrap().alignment.proportion_aligned;
            let final_ = out.logs.last().unwrap().alignment.proportion_aligned;
            alignment.push((strategy, seed, first, final_));
            at_budget.push(report);
        }
        let (random, label) = (&at_budget[0], &at_budget[1]);
        if label.js_w < random.js_w {
            lower_js_w += 1;
        }
        label_js += label.js / 3.0;
        lines.push(format!(
            "seed {seed}: JSw random {:.4} label_minority {:.4}",
            random.js_w, label.js_w
        ));
    }
    FairnessRuns {
        lines,
        lower_js_w,
        js_gap: (label_js - passive_js).abs(),
        budget_ok,
        alignment,
        elapsed: start.elapsed(),
    }
}

fn fairness(runs: &FairnessRuns) -> Outcome {
    outcome(
        runs.budget_ok && runs.lower_js_w >= 2 && runs.js_gap <= 0.02 && within(runs.elapsed, Duration::from_secs(600)),
        format!(
            "label_minority beats random on JSw in {}/3 seeds ({}); |JS - passive JS| = {:.4}; {:.1?}",
            runs.lower_js_w,
            runs.lines.join("; "),
            runs.js_gap,
            runs.elapsed
        ),
    )
}

fn alignment_trend(runs: &FairnessRuns) -> Outcome {
    let checked: Vec<&(AnnotatorStrategy, u64, f64, f64)> = runs
        .alignment
        .iter()
        .filter(|a| matches!(a.0, AnnotatorStrategy::Random | AnnotatorStrategy::SemanticDiversity))
        .collect();
    let pass = checked.iter().all(|a| a.3 > a.2);
    let detail = checked
        .iter()
        .map(|(s, seed, a, b)| format!("{s}/{seed} {a:.2}->{b:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("aligned proportion warmup -> final: {detail}"))
}

fn determinism() -> Outcome {
    let pop = small_population(11);
    let mut compared = 0;
    for config in all_configs(13) {
        let csv = |c: &ExperimentConfig| {
            let out = run_experiment(c, &pop.corpus, &pop.embeddings).unwrap();
            let mut bytes = Vec::new();
            write_iteration_csv(&out.logs, &mut bytes).unwrap();
            bytes
        };
        if csv(&config) != csv(&config) {
            return outcome(
                false,
                format!("{} produced different iteration logs", config.strategy_label()),
            );
        }
        compared += 1;
    }
    outcome(
        true,
        format!("{compared} configurations produce byte-identical iteration CSVs"),
    )
}

fn main() {
    let fairness_data = fairness_runs();
    let checks: Vec<(&str, Outcome)> = vec![
        (
            "soft-label aggregation, entropy and JSD match reference implementations",
            aggregation_oracle(),
        ),
        ("analytic gradients match central finite differences", gradient_check()),
        (
            "sample and annotator strategies match brute-force reimplementations",
            strategy_oracles(),
        ),
        (
            "budget ledger conserves consumed triples; exhausted ACAL equals passive targets",
            budget_conservation(),
        ),
        (
            "batch rule, split proportions and entropy bin edges",
            protocol_constants(),
        ),
        (
            "worst-off metrics bound the annotator averages",
            worst_off_consistency(),
        ),
        (
            "label-minority selection lowers worst-off JS at 30% budget",
            fairness(&fairness_data),
        ),
        (
            "entropy alignment rises from warmup to the final iteration",
            alignment_trend(&fairness_data),
        ),
        (
            "identical configuration and seeds give identical iteration CSVs",
            determinism(),
        ),
    ];
    let mut failed = 0;
    for (name, result) in &checks {
        println!(
            "{} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
