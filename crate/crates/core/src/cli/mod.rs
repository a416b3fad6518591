//! Command implementations behind the `pts` binary. Each command checks its
//! inputs before writing anything.

pub mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::corpus::io::{read_dataset, read_lines, write_dataset};
use crate::corpus::synth::{generate_synthetic, SynthOptions};
use crate::corpus::vocab::Vocab;
use crate::corpus::{build_vocabularies, Stopwords, TableInstance};
use crate::error::{PtsError, Result};
use crate::inference::{Generation, Generator};
use crate::metrics::{bleu, measure_decode, EvalReport};
use crate::model::Model;
use crate::training::{train as run_training, TrainReport};

pub use config::{DataConfig, DecodeConfig, RunConfig};

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PtsError::MissingFile(path.to_owned()))
    }
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(PtsError::MissingFile(p.to_owned())),
        _ => Ok(()),
    }
}

pub fn load_stopwords(path: Option<&Path>) -> Result<Stopwords> {
    match path {
        Some(p) => Stopwords::from_file(p),
        None => Ok(Stopwords::english()),
    }
}

/// Files written by [`prepare`].
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: PathBuf,
    pub vocab: PathBuf,
    pub keys: PathBuf,
    pub instances: usize,
    pub vocab_size: usize,
    pub key_vocab_size: usize,
}

/// Lowercases and annotates a raw dataset and builds both vocabularies.
/// Writes `dataset.jsonl`, `vocab.txt` and `keys.txt` under `out_dir`.
pub fn prepare(input: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    require_file(input)?;
    let stopwords = load_stopwords(cfg.data.stopwords.as_deref())?;
    let lines: Vec<_> = read_lines(input)?.iter().map(|l| l.lowercased()).collect();
    if lines.is_empty() {
        return Err(PtsError::EmptyCorpus);
    }
    let instances = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.to_instance(&stopwords).map_err(|e| PtsError::Dataset {
                path: input.to_owned(),
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_vocab = cfg.data.max_vocab.unwrap_or(cfg.model.vocab_size);
    let max_keys = cfg.data.max_keys.unwrap_or(cfg.model.key_vocab_size);
    let (vocab, keys) = build_vocabularies(&instances, max_vocab, max_keys)?;

    std::fs::create_dir_all(out_dir)?;
    let out = Prepared {
        dataset: out_dir.join("dataset.jsonl"),
        vocab: out_dir.join("vocab.txt"),
        keys: out_dir.join("keys.txt"),
        instances: instances.len(),
        vocab_size: vocab.len(),
        key_vocab_size: keys.len(),
    };
    write_dataset(&out.dataset, &instances)?;
    vocab.save(&out.vocab)?;
    keys.save(&out.keys)?;
    Ok(out)
}

/// Rewrites every line of `input` with a freshly annotated plan.
pub fn annotate(input: &Path, output: &Path, stopwords: &Stopwords) -> Result<usize> {
    require_file(input)?;
    require_parent(output)?;
    let mut lines = read_lines(input)?;
    let instances = lines
        .iter_mut()
        .enumerate()
        .map(|(i, l)| {
            l.plan = None;
            l.to_instance(stopwords).map_err(|e| PtsError::Dataset {
                path: input.to_owned(),
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_dataset(output, &instances)?;
    Ok(instances.len())
}

/// Writes `n` synthetic instances; the output depends only on the arguments.
pub fn synth(seed: u64, n: usize, duplicate_distractors: bool, output: &Path) -> Result<usize> {
    require_parent(output)?;
    let options = SynthOptions {
        duplicate_distractors,
        ..Default::default()
    };
    let instances: Vec<TableInstance> = generate_synthetic(seed, n, &options).into_iter().map(|s| s.instance).collect();
    write_dataset(output, &instances)?;
    Ok(instances.len())
}

fn read_split(path: &Path, stopwords: &Stopwords) -> Result<Vec<TableInstance>> {
    let data = read_dataset(path, stopwords)?;
    if data.is_empty() {
        return Err(PtsError::EmptyCorpus);
    }
    Ok(data)
}

/// Trains from `data.train` (validating on `data.valid` when set) and writes
/// the best checkpoint to `data.checkpoint`. Vocabularies come from
/// `data.vocab`/`data.keys` when both are set, otherwise from the training
/// split. Log lines go to `log` when given.
pub fn train(cfg: &RunConfig, log: Option<&Path>, seed: u64) -> Result<TrainReport> {
    cfg.validate()?;
    let train_path = config::require_path(&cfg.data.train, "training data")?;
    let valid_path = match &cfg.data.valid {
        Some(_) => Some(config::require_path(&cfg.data.valid, "validation data")?),
        None => None,
    };
    let checkpoint = cfg
        .data
        .checkpoint
        .as_deref()
        .ok_or_else(|| PtsError::Config("no checkpoint path configured".into()))?;
    require_parent(checkpoint)?;
    if let Some(l) = log {
        require_parent(l)?;
    }
    let stopwords = load_stopwords(cfg.data.stopwords.as_deref())?;
    let train_set = read_split(train_path, &stopwords)?;
    let valid_set = valid_path.map(|p| read_split(p, &stopwords)).transpose()?;
    let (vocab, keys) = match (&cfg.data.vocab, &cfg.data.keys) {
        (Some(v), Some(k)) => (Vocab::load(v)?, Vocab::load(k)?),
        _ => build_vocabularies(
            &train_set,
            cfg.data.max_vocab.unwrap_or(cfg.model.vocab_size),
            cfg.data.max_keys.unwrap_or(cfg.model.key_vocab_size),
        )?,
    };
    let mut model = Model::new(cfg.model.clone(), vocab, keys, seed)?;
    let mut sink: Option<BufWriter<File>> = log.map(File::create).transpose()?.map(BufWriter::new);
    let mut write_err = None;
    let report = run_training(&mut model, &train_set, valid_set.as_deref(), &cfg.train, |e| {
        let line = e.to_line();
        log::info!("{line}");
        if let Some(w) = sink.as_mut() {
            if let Err(err) = writeln!(w, "{line}") {
                write_err.get_or_insert(err);
            }
        }
    })?;
    if let Some(err) = write_err {
        return Err(err.into());
    }
    if let Some(mut w) = sink {
        w.flush()?;
    }
    model.save(checkpoint)?;
    Ok(report)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    plan: &'a [String],
    plan_pointers: &'a [usize],
    iterations: usize,
    decoder_passes: usize,
    snapshots: &'a [Vec<String>],
}

/// Path of the plan/trace sidecar written next to a hypothesis file.
pub fn trace_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".trace.jsonl");
    PathBuf::from(s)
}

/// Options for [`generate`].
#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub max_iter: usize,
    pub batch_size: usize,
    pub gold_plan: bool,
}

/// Decodes a dataset, writing one hypothesis per line to `output` and the
/// plan and trace of each instance to the sidecar at [`trace_path`].
pub fn generate(
    checkpoint: &Path,
    dataset: &Path,
    output: &Path,
    stopwords: &Stopwords,
    options: &GenerateOptions,
) -> Result<Vec<Generation>> {
    if options.max_iter == 0 {
        return Err(PtsError::Config("max_iter must be at least 1".into()));
    }
    require_file(checkpoint)?;
    require_file(dataset)?;
    require_parent(output)?;
    let model = Model::load(checkpoint)?;
    let data = read_split(dataset, stopwords)?;
    let generator = Generator::new(&model, options.max_iter);
    let generations = measure_decode(&generator, &data, options.batch_size, options.gold_plan)?.generations;

    let mut hyp = BufWriter::new(File::create(output)?);
    let mut trace = BufWriter::new(File::create(trace_path(output))?);
    for g in &generations {
        writeln!(hyp, "{}", g.text.join(" "))?;
        let line = TraceLine {
            plan: &g.plan,
            plan_pointers: &g.plan_pointers,
            iterations: g.trace.iterations,
            decoder_passes: g.trace.decoder_passes(),
            snapshots: &g.trace.snapshots,
        };
        serde_json::to_writer(&mut trace, &line)?;
        trace.write_all(b"\n")?;
    }
    hyp.flush()?;
    trace.flush()?;
    Ok(generations)
}

/// Whitespace-tokenized lines of a hypothesis file.
pub fn read_hypotheses(path: &Path) -> Result<Vec<Vec<String>>> {
    require_file(path)?;
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect())
}

/// Scores a hypothesis file against the descriptions of a dataset.
pub fn evaluate(hypotheses: &Path, dataset: &Path, stopwords: &Stopwords) -> Result<EvalReport> {
    let hyps = read_hypotheses(hypotheses)?;
    require_file(dataset)?;
    let refs: Vec<Vec<String>> = read_split(dataset, stopwords)?.into_iter().map(|i| i.description).collect();
    if hyps.len() != refs.len() {
        return Err(PtsError::DimensionMismatch(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    EvalReport::evaluate(&hyps, &refs)
}

/// One row of the quality/speed table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub max_iter: usize,
    pub batch_size: usize,
    pub bleu: f64,
    pub latency_ms: f64,
    pub mean_decoder_passes: f64,
}

/// Decodes `data` once per `(max_iter, batch_size)` pair.
pub fn benchmark_model(
    model: &Model,
    data: &[TableInstance],
    max_iters: &[usize],
    batch_sizes: &[usize],
    gold_plan: bool,
) -> Result<Vec<BenchmarkRow>> {
    if max_iters.is_empty() || batch_sizes.is_empty() || max_iters.contains(&0) || batch_sizes.contains(&0) {
        return Err(PtsError::Config("benchmark needs positive iteration caps and batch sizes".into()));
    }
    let refs: Vec<Vec<String>> = data.iter().map(|i| i.description.clone()).collect();
    let mut rows = Vec::new();
    for &batch_size in batch_sizes {
        for &max_iter in max_iters {
            let m = measure_decode(&Generator::new(model, max_iter), data, batch_size, gold_plan)?;
            let hyps: Vec<Vec<String>> = m.generations.into_iter().map(|g| g.text).collect();
            rows.push(BenchmarkRow {
                max_iter,
                batch_size,
                bleu: bleu(&hyps, &refs)?,
                latency_ms: m.latency_ms,
                mean_decoder_passes: m.mean_decoder_passes,
            });
        }
    }
    Ok(rows)
}

pub fn benchmark(
    checkpoint: &Path,
    dataset: &Path,
    stopwords: &Stopwords,
    max_iters: &[usize],
    batch_sizes: &[usize],
    gold_plan: bool,
) -> Result<Vec<BenchmarkRow>> {
    require_file(checkpoint)?;
    require_file(dataset)?;
    let model = Model::load(checkpoint)?;
    let data = read_split(dataset, stopwords)?;
    benchmark_model(&model, &data, max_iters, batch_sizes, gold_plan)
}

pub fn format_table(rows: &[BenchmarkRow]) -> String {
    let mut s = format!("{:>8} {:>6} {:>8} {:>12} {:>8}\n", "max_iter", "batch", "bleu", "latency_ms", "passes");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>8.2} {:>12.3} {:>8.2}",
            r.max_iter, r.batch_size, r.bleu, r.latency_ms, r.mean_decoder_passes
        );
    }
    s
}
