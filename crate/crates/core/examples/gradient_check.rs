//! Finite-difference check of the full joint loss at f64 on a tiny model,
//! printing the worst entry per tensor.
//!
//! ```text
//! cargo run --release --example gradient_check -- [d_model]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pts::corpus::build_vocabularies;
use pts::corpus::synth::generate_synthetic_corpus;
use pts::model::{Model, ModelConfig};
use pts::nnet::{check_gradients, Tape};
use pts::training::{instance_loss, Example, SeamTargets};

fn main() -> pts::Result<()> {
    let d_model: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(8);
    let corpus = generate_synthetic_corpus(3, 1);
    let (vocab, keys) = build_vocabularies(&corpus, 200, 20)?;
    let config = ModelConfig {
        d_model,
        d_hidden: 2 * d_model,
        n_head: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        token_embed_dim: 4,
        key_embed_dim: 2,
        position_embed_dim: 2,
        max_position: 8,
        max_placeholders: 16,
        ..ModelConfig::small(0, 0)
    };
    let model = Model::new(config, vocab, keys, 1)?;
    let store = model.params.cast::<f64>();
    let ex = Example::new(&model, &corpus[0]);
    let seam = SeamTargets::sample(&ex, &mut ChaCha8Rng::seed_from_u64(1))?;

    let mut tape = Tape::new(&store);
    let graph = instance_loss(&model.net, &mut tape, &ex, &seam, 0.05, None)?;
    println!("loss {:.6} over {} parameters", tape.scalar(graph.total), store.count());
    let decisions = graph.decisions.clone();
    let grads = tape.backward(graph.total);
    let checks = check_gradients(&store, &grads, 4, 1e-6, 0, |s| {
        let mut t = Tape::new(s);
        let g = instance_loss(&model.net, &mut t, &ex, &seam, 0.05, Some(&decisions))?;
        Ok(t.scalar(g.total))
    })?;

    let mut worst_overall: f64 = 0.0;
    for id in store.ids() {
        let name = store.name(id);
        let worst = checks
            .iter()
            .filter(|c| c.name == name)
            .max_by(|a, b| a.relative_error().total_cmp(&b.relative_error()));
        if let Some(c) = worst {
            worst_overall = worst_overall.max(c.relative_error());
            println!(
                "{name:<44} analytic {:>12.5e} numeric {:>12.5e} rel {:.1e}",
                c.analytic,
                c.numeric,
                c.relative_error()
            );
        }
    }
    println!("{} entries checked, worst relative error {worst_overall:.2e}", checks.len());
    Ok(())
}
