//! Acceptance suite. Runs every criterion in order and prints one
//! PASS/FAIL line each; exits nonzero when any criterion fails.
//!
//! Runs without the libtest harness so the lines are always shown and the
//! timing-sensitive criteria never share the CPU with another test.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pts::cli::{self, BenchmarkRow};
use pts::corpus::io::read_dataset;
use pts::corpus::synth::{generate_synthetic, generate_synthetic_corpus, SynthOptions};
use pts::corpus::{build_vocabularies, Stopwords, TableInstance};
use pts::inference::{Generation, Generator};
use pts::metrics::{bleu, distinct_n, measure_decode, plan_f1, repetition, rouge_l, rouge_l_pair, ROUGE_BETA};
use pts::model::{parameter_count, Model, ModelConfig, ModelLayout};
use pts::training::{train, TrainConfig};

// pinned tolerances and budgets
const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(120);
const OVERFIT_CORPUS_SEED: u64 = 7;
const OVERFIT_INSTANCES: usize = 64;
const OVERFIT_MAX_STEPS: usize = 5_000;
const OVERFIT_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);
const OVERFIT_MIN_BLEU: f64 = 95.0;
const OVERFIT_MIN_PLAN_EXACT: f64 = 0.90;
const SHARING_MAX_RATIO: f64 = 0.55;
const RETHINK_MAX_OVERHEAD: f64 = 0.10;
const SWEEP_ITERS: [usize; 5] = [1, 2, 3, 5, 10];
const SWEEP_BATCH: usize = 8;
const SWEEP_REPEATS: usize = 5;
/// Allowed relative drop in latency between consecutive iteration caps;
/// caps beyond convergence run the same passes and differ only by timer noise.
const LATENCY_NOISE_TOL: f64 = 0.05;
const BLEU_EPS: f64 = 1e-9;
const HELDOUT_SEED: u64 = 1007;
const ABLATION_SEEDS: [u64; 4] = [1, 2, 3, 4];
const ABLATION_STEPS: usize = 500;
const ABLATION_TRAIN_SEED: u64 = 31;
const ABLATION_TEST_SEED: u64 = 32;
const METRIC_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Trained {
    model: Model,
    corpus: Vec<TableInstance>,
    templates: Vec<usize>,
    generations: Vec<Generation>,
}

fn c1_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut uncovered = Vec::new();
    for (d_model, seeds) in [(4, [1, 2]), (8, [3, 4])] {
        for seed in seeds {
            let checks = common::model_gradient_checks(d_model, seed, 3);
            count += checks.len();
            worst = checks.iter().map(|c| c.relative_error()).fold(worst, f64::max);
            uncovered.extend(common::uncovered_components(&checks));
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= GRAD_REL_TOL && uncovered.is_empty() && elapsed < GRAD_TIME_LIMIT,
        format!(
            "{count} entries, max relative error {worst:.2e} (tol {GRAD_REL_TOL:.0e}), uncovered {uncovered:?}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_oracles() -> Outcome {
    let lcs = common::oracles::lcs_mismatches(1000, 101);
    let gaps = common::oracles::gap_mismatches(1000, 102);
    let sums = common::oracles::gap_sum_violations(10_000, 103);
    check(
        lcs == 0 && gaps == 0 && sums == 0,
        format!("lcs mismatches {lcs}/1000, gap mismatches {gaps}/1000, sum violations {sums}/10000"),
    )
}

fn overfit_config() -> TrainConfig {
    TrainConfig {
        peak_lr: 1e-3,
        clip_norm: Some(1.0),
        warmup: 200,
        max_steps: OVERFIT_MAX_STEPS,
        batch_size: 8,
        eval_every: 250,
        patience: 0,
        target_bleu: Some(99.0),
        log_every: 250,
        ..Default::default()
    }
}

fn c3_overfit(trained: &mut Option<Trained>) -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("synth.jsonl");
    cli::synth(OVERFIT_CORPUS_SEED, OVERFIT_INSTANCES, false, &path).map_err(|e| e.to_string())?;
    let corpus = read_dataset(&path, &Stopwords::english()).map_err(|e| e.to_string())?;
    let templates: Vec<usize> = generate_synthetic(OVERFIT_CORPUS_SEED, OVERFIT_INSTANCES, &SynthOptions::default())
        .into_iter()
        .map(|s| s.template)
        .collect();

    let (vocab, keys) = build_vocabularies(&corpus, 1000, 100).map_err(|e| e.to_string())?;
    let mut model = Model::new(ModelConfig::small(0, 0), vocab, keys, 1).map_err(|e| e.to_string())?;
    let report = train(&mut model, &corpus, Some(&corpus), &overfit_config(), |e| eprintln!("  {}", e.to_line()))
        .map_err(|e| e.to_string())?;

    let tables: Vec<&[_]> = corpus.iter().map(|i| &i.records[..]).collect();
    let generations = Generator::new(&model, 10).generate_batch(&tables).map_err(|e| e.to_string())?;
    let hyps: Vec<Vec<String>> = generations.iter().map(|g| g.text.clone()).collect();
    let refs: Vec<Vec<String>> = corpus.iter().map(|i| i.description.clone()).collect();
    let score = bleu(&hyps, &refs).map_err(|e| e.to_string())?;
    let exact = generations.iter().zip(&corpus).filter(|(g, i)| g.plan == i.plan_tokens).count();
    let exact_rate = exact as f64 / corpus.len() as f64;
    let elapsed = start.elapsed();
    let cfg = model.config();
    let detail = format!(
        "d_model {} layers {}+{}, {} steps, training BLEU {score:.2} (min {OVERFIT_MIN_BLEU}), plan exact {exact}/{} (min {:.0}%), {:.0}s",
        cfg.d_model,
        cfg.encoder_layers,
        cfg.decoder_layers,
        report.steps,
        corpus.len(),
        OVERFIT_MIN_PLAN_EXACT * 100.0,
        elapsed.as_secs_f64()
    );
    let ok = score >= OVERFIT_MIN_BLEU
        && exact_rate >= OVERFIT_MIN_PLAN_EXACT
        && report.steps <= OVERFIT_MAX_STEPS
        && elapsed < OVERFIT_TIME_LIMIT;
    *trained = Some(Trained {
        model,
        corpus,
        templates,
        generations,
    });
    check(ok, detail)
}

fn need(trained: &Option<Trained>) -> Result<&Trained, String> {
    trained.as_ref().ok_or_else(|| "no trained model (criterion 3 did not finish)".to_string())
}

fn c4_copy(trained: &Option<Trained>) -> Outcome {
    let t = need(trained)?;
    let mut tokens = 0;
    let mut bad = 0;
    for (g, inst) in t.generations.iter().zip(&t.corpus) {
        let values: HashSet<&str> = inst.records.iter().map(|r| r.value_token.as_str()).collect();
        for (tok, &p) in g.plan.iter().zip(&g.plan_pointers) {
            tokens += 1;
            if !values.contains(tok.as_str()) || inst.records[p].value_token != *tok {
                bad += 1;
            }
        }
        if g.plan.len() != g.plan_pointers.len() {
            bad += 1;
        }
    }
    check(
        bad == 0 && tokens > 0,
        format!("{} of {tokens} plan tokens copied from the source table", tokens - bad),
    )
}

fn c5_sharing() -> Outcome {
    let config = ModelConfig::default();
    let joint = parameter_count(&config, ModelLayout::Joint);
    let two = parameter_count(&config, ModelLayout::PlanOnly) + parameter_count(&config, ModelLayout::SeamOnly);
    let no_rethink = parameter_count(
        &ModelConfig {
            rethinking: false,
            ..config.clone()
        },
        ModelLayout::Joint,
    );
    let ratio = joint as f64 / two as f64;
    let overhead = joint as f64 / no_rethink as f64 - 1.0;
    check(
        ratio < SHARING_MAX_RATIO && overhead < RETHINK_MAX_OVERHEAD,
        format!(
            "joint {:.1}M vs two models {:.1}M (ratio {:.1}%, max {:.0}%); rethinking adds {:.1}% (max {:.0}%)",
            joint as f64 / 1e6,
            two as f64 / 1e6,
            ratio * 100.0,
            SHARING_MAX_RATIO * 100.0,
            overhead * 100.0,
            RETHINK_MAX_OVERHEAD * 100.0
        ),
    )
}

fn c6_iterations(trained: &Option<Trained>) -> Outcome {
    let t = need(trained)?;
    let max_iter = 10;
    let pick = |template: usize| -> Vec<&TableInstance> {
        t.corpus
            .iter()
            .zip(&t.templates)
            .filter(|(_, &k)| k == template)
            .map(|(i, _)| i)
            .collect()
    };
    let (short, long) = (pick(0), pick(3));
    if short.is_empty() || long.is_empty() {
        return Err("corpus lacks short or long instances".into());
    }
    let passes = |set: &[&TableInstance], n: usize| -> Result<Vec<(usize, usize)>, String> {
        let generator = Generator::new(&t.model, n);
        set.iter()
            .map(|i| {
                generator
                    .generate(&i.records)
                    .map(|g| (g.text.len(), g.trace.decoder_passes()))
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let s10 = passes(&short, max_iter)?;
    let l10 = passes(&long, max_iter)?;
    let s1 = passes(&short, 1)?;
    let l1 = passes(&long, 1)?;
    let distinct: HashSet<usize> = s10.iter().chain(&l10).map(|p| p.1).collect();
    let bound = 3 * max_iter + 4;
    let within = distinct.iter().all(|&p| p <= bound);
    let monotone = s1.iter().zip(&s10).chain(l1.iter().zip(&l10)).all(|(a, b)| a.1 <= b.1);
    let mean_len = |v: &[(usize, usize)]| v.iter().map(|p| p.0).sum::<usize>() as f64 / v.len() as f64;
    check(
        distinct.len() == 1 && within && monotone,
        format!(
            "max_iter {max_iter}: I_DEC values {distinct:?} over {} short (mean {:.1} tokens) and {} long (mean {:.1} tokens) outputs, bound {bound}; I_DEC(1) <= I_DEC(10): {monotone}",
            short.len(),
            mean_len(&s10),
            long.len(),
            mean_len(&l10)
        ),
    )
}

fn c7_sweep(trained: &Option<Trained>) -> Outcome {
    let t = need(trained)?;
    let mut best: Vec<BenchmarkRow> = Vec::new();
    for _ in 0..SWEEP_REPEATS {
        let rows = cli::benchmark_model(&t.model, &t.corpus, &SWEEP_ITERS, &[SWEEP_BATCH], false).map_err(|e| e.to_string())?;
        if best.is_empty() {
            best = rows;
        } else {
            for (b, r) in best.iter_mut().zip(rows) {
                if r.bleu != b.bleu {
                    return Err(format!("BLEU not deterministic at max_iter {}", r.max_iter));
                }
                b.latency_ms = b.latency_ms.min(r.latency_ms);
            }
        }
    }
    for line in cli::format_table(&best).lines() {
        eprintln!("  {line}");
    }
    let bleu_ok = best.windows(2).all(|w| w[1].bleu + BLEU_EPS >= w[0].bleu);
    let latency_ok = best
        .windows(2)
        .all(|w| w[1].latency_ms >= w[0].latency_ms * (1.0 - LATENCY_NOISE_TOL));
    let summary: Vec<String> = best
        .iter()
        .map(|r| format!("N={}: {:.2} BLEU / {:.2} ms", r.max_iter, r.bleu, r.latency_ms))
        .collect();
    check(
        bleu_ok && latency_ok,
        format!(
            "{} (BLEU nondecreasing: {bleu_ok}, latency nondecreasing within {:.0}%: {latency_ok})",
            summary.join(", "),
            LATENCY_NOISE_TOL * 100.0
        ),
    )
}

fn c8_gold_plan(trained: &Option<Trained>) -> Outcome {
    let t = need(trained)?;
    let heldout = generate_synthetic_corpus(HELDOUT_SEED, OVERFIT_INSTANCES);
    let refs: Vec<Vec<String>> = heldout.iter().map(|i| i.description.clone()).collect();
    let generator = Generator::new(&t.model, 10);
    let score = |gold: bool| -> Result<f64, String> {
        let m = measure_decode(&generator, &heldout, SWEEP_BATCH, gold).map_err(|e| e.to_string())?;
        let hyps: Vec<Vec<String>> = m.generations.into_iter().map(|g| g.text).collect();
        bleu(&hyps, &refs).map_err(|e| e.to_string())
    };
    let (gold, predicted) = (score(true)?, score(false)?);
    check(
        gold >= predicted,
        format!("held-out BLEU with gold plan {gold:.2} vs predicted plan {predicted:.2}"),
    )
}

fn ablation_f1(train_set: &[TableInstance], test_set: &[TableInstance], seed: u64, rethinking: bool) -> Result<f64, String> {
    let (vocab, keys) = build_vocabularies(train_set, 1000, 100).map_err(|e| e.to_string())?;
    let config = ModelConfig {
        rethinking,
        ..ModelConfig::small(0, 0)
    };
    let mut model = Model::new(config, vocab, keys, seed).map_err(|e| e.to_string())?;
    let train_config = TrainConfig {
        max_steps: ABLATION_STEPS,
        eval_every: 0,
        seed,
        ..overfit_config()
    };
    train(&mut model, train_set, None, &train_config, |_| {}).map_err(|e| e.to_string())?;
    let tables: Vec<&[_]> = test_set.iter().map(|i| &i.records[..]).collect();
    let out = Generator::new(&model, 1).generate_batch(&tables).map_err(|e| e.to_string())?;
    let predicted: Vec<Vec<String>> = out.into_iter().map(|g| g.plan).collect();
    let gold: Vec<Vec<String>> = test_set.iter().map(|i| i.plan_tokens.clone()).collect();
    plan_f1(&predicted, &gold).map_err(|e| e.to_string())
}

fn c9_rethinking() -> Outcome {
    let options = SynthOptions {
        duplicate_distractors: true,
        ..Default::default()
    };
    let corpus = |seed| -> Vec<TableInstance> {
        generate_synthetic(seed, OVERFIT_INSTANCES, &options)
            .into_iter()
            .map(|s| s.instance)
            .collect()
    };
    let (train_set, test_set) = (corpus(ABLATION_TRAIN_SEED), corpus(ABLATION_TEST_SEED));
    let mut with = Vec::new();
    let mut without = Vec::new();
    for seed in ABLATION_SEEDS {
        with.push(ablation_f1(&train_set, &test_set, seed, true)?);
        without.push(ablation_f1(&train_set, &test_set, seed, false)?);
        eprintln!("  seed {seed}: plan F1 with rethinking {:.4}, without {:.4}", with.last().unwrap(), without.last().unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mw, mo) = (mean(&with), mean(&without));
    check(
        mw >= mo,
        format!(
            "mean held-out plan F1 over {} seeds: with rethinking {:.2}%, without {:.2}%",
            ABLATION_SEEDS.len(),
            mw * 100.0,
            mo * 100.0
        ),
    )
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn c10_metrics() -> Outcome {
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > METRIC_TOL {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };
    let corpus = vec![toks("the cat sat on the mat"), toks("a dog barked at the mailman today")];
    let e = |r: pts::Result<f64>| r.unwrap_or(f64::NAN);
    expect("bleu identity", e(bleu(&corpus, &corpus)), 100.0);
    expect("bleu empty hypothesis", e(bleu(&[vec![]], &[toks("the cat")])), 0.0);
    // orders 1-3 match fully; no 4-grams in the hypothesis; BP = exp(1 - 4/3)
    expect(
        "bleu short hypothesis",
        e(bleu(&[toks("the cat sat")], &[toks("the cat sat down")])),
        100.0 * (1.0f64 - 4.0 / 3.0).exp(),
    );
    expect("rouge identity", e(rouge_l(&corpus, &corpus)), 1.0);
    expect("rouge disjoint", rouge_l_pair(&toks("x y"), &toks("a b")), 0.0);
    let (p, r, b2) = (2.0 / 3.0, 1.0, ROUGE_BETA * ROUGE_BETA);
    expect("rouge [a b c] vs [a c]", rouge_l_pair(&toks("a b c"), &toks("a c")), (1.0 + b2) * p * r / (r + b2 * p));
    expect("repetition a a b", repetition(&[toks("a a b")]), 100.0 / 3.0);
    expect("distinct-1 a a b", distinct_n(&[toks("a a b")], 1), 2.0 / 3.0);
    expect("repetition unique", repetition(&[toks("a b c d")]), 0.0);
    expect(
        "repetition two sentences",
        repetition(&[toks("a a a b"), toks("c d")]),
        100.0 * (2.0 / 4.0 + 0.0) / 2.0,
    );
    let repeated = distinct_n(&[toks("a b c"), toks("a b c")], 2);
    let varied = distinct_n(&[toks("a b c"), toks("d e f")], 2);
    expect("distinct-2 repeated corpus", repeated, 0.5);
    expect("distinct-2 varied corpus", varied, 1.0);
    if repeated >= varied {
        failures.push("distinct-2 not lower for repeated corpus".into());
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "BLEU, ROUGE-L, repetition and Distinct-n match hand-computed values".into()
        } else {
            failures.join("; ")
        },
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    eprintln!("criterion {id} ({name}) running");
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("[{tag}] criterion {id:>2} {name}: {detail} [{secs:.1}s]");
    ok
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut trained = None;
    let results = [
        run(1, "gradient correctness", c1_gradients),
        run(2, "edit-algorithm oracles", c2_oracles),
        run(3, "overfit convergence", || c3_overfit(&mut trained)),
        run(4, "copy faithfulness", || c4_copy(&trained)),
        run(5, "parameter sharing", c5_sharing),
        run(6, "iteration decoupling", || c6_iterations(&trained)),
        run(7, "quality-speed sweep", || c7_sweep(&trained)),
        run(8, "gold-plan diagnostic", || c8_gold_plan(&trained)),
        run(9, "rethinking ablation direction", c9_rethinking),
        run(10, "metrics self-tests", c10_metrics),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
