//! Writes a synthetic biography corpus and prints a few instances with
//! their linearized records and plans.
//!
//! ```text
//! cargo run --release --example synth_corpus -- [n] [out.jsonl]
//! ```

use std::path::PathBuf;

use pts::corpus::io::write_dataset;
use pts::corpus::synth::{generate_synthetic, SynthOptions, TEMPLATE_COUNT};

fn main() -> pts::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let out = args.next().map(PathBuf::from);

    let corpus = generate_synthetic(1, n, &SynthOptions::default());
    let mut per_template = [0usize; TEMPLATE_COUNT];
    for s in &corpus {
        per_template[s.template] += 1;
    }
    println!("{n} instances, per template {per_template:?}");
    for s in corpus.iter().take(2) {
        let inst = &s.instance;
        println!("\ntemplate {}: {}", s.template, inst.description.join(" "));
        for (i, r) in inst.records.iter().enumerate() {
            println!("  r{i:<2} ({}, {}, {}, {})", r.value_token, r.key_token, r.pos_fwd, r.pos_bwd);
        }
        println!("  plan {:?} -> {:?}", inst.plan_tokens, inst.plan_pointers);
    }

    let distractors = generate_synthetic(
        1,
        1,
        &SynthOptions {
            duplicate_distractors: true,
            ..Default::default()
        },
    );
    let keys: Vec<&str> = distractors[0].instance.records.iter().map(|r| r.key_token.as_str()).collect();
    println!("\nwith duplicate distractors, keys: {keys:?}");

    if let Some(path) = out {
        let instances: Vec<_> = corpus.into_iter().map(|s| s.instance).collect();
        write_dataset(&path, &instances)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
