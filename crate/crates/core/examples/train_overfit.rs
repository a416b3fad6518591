//! Overfits a small model on a synthetic corpus and reports training-set
//! quality.
//!
//! ```text
//! cargo run --release --example train_overfit -- [instances] [max_steps]
//! ```

use std::time::Instant;

use pts::corpus::build_vocabularies;
use pts::corpus::synth::generate_synthetic_corpus;
use pts::inference::Generator;
use pts::metrics::bleu;
use pts::model::{Model, ModelConfig};
use pts::training::{train, TrainConfig};

fn main() -> pts::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(64);
    let max_steps = args.get(1).copied().unwrap_or(3000);

    let corpus = generate_synthetic_corpus(7, n);
    let (vocab, keys) = build_vocabularies(&corpus, 1000, 100)?;
    let mut model = Model::new(ModelConfig::small(0, 0), vocab, keys, 1)?;
    println!("parameters: {}", model.params.count());

    let config = TrainConfig {
        peak_lr: 1e-3,
        clip_norm: Some(1.0),
        warmup: 200,
        max_steps,
        batch_size: 8,
        eval_every: 250,
        patience: 0,
        target_bleu: Some(99.0),
        log_every: 50,
        ..Default::default()
    };
    let start = Instant::now();
    let report = train(&mut model, &corpus, Some(&corpus), &config, |e| {
        println!("{} elapsed={:.1}s", e.to_line(), start.elapsed().as_secs_f64())
    })?;
    println!("steps={} best_bleu={:?}", report.steps, report.best_bleu);

    let generator = Generator::new(&model, 10);
    let mut hyps = Vec::new();
    let mut exact_plans = 0;
    for inst in &corpus {
        let g = generator.generate(&inst.records)?;
        exact_plans += usize::from(g.plan == inst.plan_tokens);
        hyps.push(g.text);
    }
    let refs: Vec<Vec<String>> = corpus.iter().map(|i| i.description.clone()).collect();
    println!("training bleu: {:.2}", bleu(&hyps, &refs)?);
    println!("plan exact match: {}/{}", exact_plans, corpus.len());
    for (h, r) in hyps.iter().zip(&refs).take(3) {
        println!("hyp: {}\nref: {}", h.join(" "), r.join(" "));
    }
    Ok(())
}
