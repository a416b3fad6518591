//! Trains a small model briefly, round-trips it through a checkpoint and
//! shows each decoding stage: plan, rethought plan, and every seaming
//! iteration.
//!
//! ```text
//! cargo run --release --example generate -- [steps]
//! ```

use pts::corpus::build_vocabularies;
use pts::corpus::synth::generate_synthetic_corpus;
use pts::encoder::encode_table;
use pts::inference::Generator;
use pts::model::{Model, ModelConfig};
use pts::planner::Planner;
use pts::training::{train, TrainConfig};

fn main() -> pts::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(600);
    let corpus = generate_synthetic_corpus(11, 32);
    let (vocab, keys) = build_vocabularies(&corpus, 1000, 100)?;
    let mut model = Model::new(ModelConfig::small(0, 0), vocab, keys, 1)?;
    let config = TrainConfig {
        peak_lr: 1e-3,
        clip_norm: Some(1.0),
        warmup: 200,
        max_steps: steps,
        batch_size: 8,
        eval_every: 0,
        log_every: 100,
        ..Default::default()
    };
    train(&mut model, &corpus, None, &config, |e| println!("{}", e.to_line()))?;

    let dir = std::env::temp_dir().join("pts-generate-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.ckpt");
    model.save(&path)?;
    let model = Model::load(&path)?;

    let generator = Generator::new(&model, 10);
    for inst in corpus.iter().take(3) {
        let memory = encode_table(&model, &inst.records)?;
        let (_, state) = Planner::new(&model).plan_with_memory(&inst.records, &memory)?;
        let g = generator.generate(&inst.records)?;
        println!("\nreference:   {}", inst.description.join(" "));
        println!("first plan:  {}", state.first_pass.words().join(" "));
        println!("plan:        {}", g.plan.join(" "));
        for (i, s) in g.trace.snapshots.iter().enumerate() {
            println!("iteration {}: {}", i + 1, s.join(" "));
        }
        println!("decoder passes: {} ({:?})", g.trace.decoder_passes(), g.trace.passes);
    }
    let gold = generator.generate_with_plan(&corpus[0].records, &corpus[0].plan_pointers)?;
    println!("\nwith the reference plan: {}", gold.text.join(" "));
    Ok(())
}
