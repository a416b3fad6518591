//! Trains models with and without the rethinking block on a corpus with
//! duplicated distractor records and compares held-out plan F1.
//!
//! ```text
//! cargo run --release --example rethinking_ablation -- [seeds] [steps]
//! ```

use pts::corpus::build_vocabularies;
use pts::corpus::synth::{generate_synthetic, SynthOptions};
use pts::corpus::TableInstance;
use pts::inference::Generator;
use pts::metrics::plan_f1;
use pts::model::{parameter_count, Model, ModelConfig, ModelLayout};
use pts::planner::RethinkMode;
use pts::training::{train, TrainConfig};

fn corpus(seed: u64, n: usize) -> Vec<TableInstance> {
    let options = SynthOptions {
        duplicate_distractors: true,
        ..Default::default()
    };
    generate_synthetic(seed, n, &options).into_iter().map(|s| s.instance).collect()
}

fn plan_score(model: &Model, mode: RethinkMode, test: &[TableInstance]) -> pts::Result<f64> {
    let tables: Vec<&[_]> = test.iter().map(|i| &i.records[..]).collect();
    let out = Generator::new(model, 1).with_rethink(mode).generate_batch(&tables)?;
    let predicted: Vec<Vec<String>> = out.into_iter().map(|g| g.plan).collect();
    let gold: Vec<Vec<String>> = test.iter().map(|i| i.plan_tokens.clone()).collect();
    plan_f1(&predicted, &gold)
}

fn main() -> pts::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let seeds = args.first().copied().unwrap_or(4);
    let steps = args.get(1).copied().unwrap_or(500) as usize;
    let (train_set, test_set) = (corpus(31, 64), corpus(32, 64));
    let (vocab, keys) = build_vocabularies(&train_set, 1000, 100)?;

    let small = ModelConfig::small(vocab.len(), keys.len());
    let with = parameter_count(&small, ModelLayout::Joint);
    let without = parameter_count(&ModelConfig { rethinking: false, ..small }, ModelLayout::Joint);
    println!("parameters: {with} with rethinking, {without} without");

    println!("{:>4} {:>10} {:>10} {:>12}", "seed", "rethink", "none", "first head");
    for seed in 1..=seeds {
        let mut scores = Vec::new();
        for rethinking in [true, false] {
            let config = ModelConfig {
                rethinking,
                ..ModelConfig::small(0, 0)
            };
            let mut model = Model::new(config, vocab.clone(), keys.clone(), seed)?;
            let train_config = TrainConfig {
                peak_lr: 1e-3,
                clip_norm: Some(1.0),
                warmup: 200,
                max_steps: steps,
                batch_size: 8,
                eval_every: 0,
                seed,
                ..Default::default()
            };
            train(&mut model, &train_set, None, &train_config, |_| {})?;
            let mode = if rethinking { RethinkMode::Full } else { RethinkMode::Off };
            scores.push(plan_score(&model, mode, &test_set)?);
            if rethinking {
                // same weights, second head bypassed
                scores.push(plan_score(&model, RethinkMode::Off, &test_set)?);
            }
        }
        println!("{seed:>4} {:>10.4} {:>10.4} {:>12.4}", scores[0], scores[2], scores[1]);
    }
    Ok(())
}
