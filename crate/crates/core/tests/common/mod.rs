#![allow(dead_code)]

pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pts::corpus::build_vocabularies;
use pts::corpus::synth::{generate_synthetic, SynthOptions};
use pts::model::{Model, ModelConfig};
use pts::nnet::{check_gradients, GradCheck, Tape};
use pts::training::{instance_loss, Example, SeamTargets};

pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

/// A tiny model with randomly drawn widths and depths.
pub fn random_tiny_model(d_model: usize, seed: u64, options: &SynthOptions) -> (Model, Vec<pts::corpus::TableInstance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus: Vec<_> = generate_synthetic(seed, 2, options).into_iter().map(|s| s.instance).collect();
    let (vocab, keys) = build_vocabularies(&corpus, 200, 20).unwrap();
    let heads: Vec<usize> = (1..=d_model).filter(|h| d_model.is_multiple_of(*h) && *h <= 2).collect();
    let config = ModelConfig {
        d_model,
        d_hidden: rng.random_range(2..=12),
        n_head: heads[rng.random_range(0..heads.len())],
        encoder_layers: rng.random_range(1..=2),
        decoder_layers: rng.random_range(1..=2),
        token_embed_dim: rng.random_range(2..=6),
        key_embed_dim: rng.random_range(1..=4),
        position_embed_dim: rng.random_range(1..=3),
        max_position: 4,
        max_records: 16,
        max_length: 64,
        max_placeholders: 8,
        rethinking: true,
        ..ModelConfig::small(0, 0)
    };
    (Model::new(config, vocab, keys, seed).unwrap(), corpus)
}

/// Finite-difference checks of the full joint loss of one instance at f64,
/// with the argmax decisions of the unperturbed graph held fixed.
pub fn model_gradient_checks(d_model: usize, seed: u64, per_tensor: usize) -> Vec<GradCheck> {
    let options = SynthOptions {
        templates: vec![0, 1],
        ..Default::default()
    };
    let (model, corpus) = random_tiny_model(d_model, seed, &options);
    let store = model.params.cast::<f64>();
    let mut out = Vec::new();
    for inst in &corpus {
        let ex = Example::new(&model, inst);
        let seam = SeamTargets::sample(&ex, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut tape = Tape::new(&store);
        let graph = instance_loss(&model.net, &mut tape, &ex, &seam, 0.5, None).unwrap();
        let decisions = graph.decisions.clone();
        let grads = tape.backward(graph.total);
        let checks = check_gradients(&store, &grads, per_tensor, GRADCHECK_STEP, seed, |s| {
            let mut t = Tape::new(s);
            let g = instance_loss(&model.net, &mut t, &ex, &seam, 0.5, Some(&decisions))?;
            Ok(t.scalar(g.total))
        })
        .unwrap();
        out.extend(checks);
    }
    out
}

/// Tensor-name prefixes, one per parameterized component. The token head
/// is tied to `decoder.token_embed` plus `head.token.bias`.
pub const COMPONENTS: [&str; 16] = [
    "record.token_embed",
    "record.key_embed",
    "record.pos_fwd_embed",
    "record.pos_bwd_embed",
    "record.proj",
    "encoder.",
    "decoder.token_embed",
    "decoder.position_embed",
    "decoder.0.",
    "head.placeholder",
    "head.pointer",
    "head.deletion",
    "head.token.bias",
    "rethink.fusion",
    "rethink.block",
    "rethink.pointer",
];

/// Components without any checked entry with a nonzero analytic gradient.
pub fn uncovered_components(checks: &[GradCheck]) -> Vec<&'static str> {
    COMPONENTS
        .iter()
        .copied()
        .filter(|c| !checks.iter().any(|k| k.name.starts_with(c) && k.analytic != 0.0))
        .collect()
}

/// Trains a small model until greedy decoding reproduces every training
/// description (validation BLEU 100 on the training set) or `max_steps`.
pub fn memorize(corpus: &[pts::corpus::TableInstance], max_steps: usize, seed: u64) -> (Model, pts::training::TrainReport) {
    let (vocab, keys) = build_vocabularies(corpus, 1000, 100).unwrap();
    let mut model = Model::new(ModelConfig::small(0, 0), vocab, keys, seed).unwrap();
    let config = pts::training::TrainConfig {
        peak_lr: 1e-3,
        clip_norm: Some(1.0),
        warmup: 100,
        max_steps,
        batch_size: corpus.len().clamp(4, 8),
        seed,
        eval_every: 50,
        patience: 0,
        target_bleu: Some(100.0 - 1e-9),
        ..Default::default()
    };
    let report = pts::training::train(&mut model, corpus, Some(corpus), &config, |_| {}).unwrap();
    (model, report)
}
