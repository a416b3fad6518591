//! Overfits a small model, then sweeps the seaming iteration cap and batch
//! size, printing BLEU, latency per batch and mean decoder passes.
//!
//! ```text
//! cargo run --release --example quality_speed_sweep -- [instances]
//! ```

use pts::cli::{benchmark_model, format_table};
use pts::corpus::build_vocabularies;
use pts::corpus::synth::generate_synthetic_corpus;
use pts::model::{Model, ModelConfig};
use pts::training::{train, TrainConfig};

fn main() -> pts::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(64);
    let corpus = generate_synthetic_corpus(7, n);
    let (vocab, keys) = build_vocabularies(&corpus, 1000, 100)?;
    let mut model = Model::new(ModelConfig::small(0, 0), vocab, keys, 1)?;
    let config = TrainConfig {
        peak_lr: 1e-3,
        clip_norm: Some(1.0),
        warmup: 200,
        max_steps: 5000,
        batch_size: 8,
        eval_every: 250,
        patience: 0,
        target_bleu: Some(99.0),
        log_every: 250,
        ..Default::default()
    };
    let report = train(&mut model, &corpus, Some(&corpus), &config, |e| println!("{}", e.to_line()))?;
    println!("trained {} steps, best BLEU {:?}\n", report.steps, report.best_bleu);

    let rows = benchmark_model(&model, &corpus, &[1, 2, 3, 5, 10], &[1, 8, 32], false)?;
    print!("{}", format_table(&rows));
    Ok(())
}
