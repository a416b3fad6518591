use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pts::cli::{self, GenerateOptions, RunConfig};

#[derive(Parser)]
#[command(name = "pts", version, about = "Plan-then-seam table-to-text generation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowercase, annotate plans and build vocabularies.
    Prepare {
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Add plan annotations to a dataset.
    Annotate {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "PTS_STOPWORDS")]
        stopwords: Option<PathBuf>,
    },
    /// Write a synthetic biography corpus.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        distractors: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Decode a dataset.
    Generate {
        /// Falls back to `data.checkpoint` of the config.
        #[arg(long, env = "PTS_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Supplies `[decode]` defaults and the checkpoint path.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Seam the reference plans instead of predicted ones.
        #[arg(long)]
        gold_plan: bool,
        #[arg(long, env = "PTS_STOPWORDS")]
        stopwords: Option<PathBuf>,
    },
    /// Score hypotheses against a dataset.
    Evaluate {
        hypotheses: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long, env = "PTS_STOPWORDS")]
        stopwords: Option<PathBuf>,
    },
    /// Quality and latency over iteration caps and batch sizes.
    Benchmark {
        #[arg(long, env = "PTS_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
        max_iter: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        batch_size: Vec<usize>,
        #[arg(long)]
        gold_plan: bool,
        #[arg(long, env = "PTS_STOPWORDS")]
        stopwords: Option<PathBuf>,
    },
}

fn load_config(path: Option<PathBuf>) -> pts::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(&p),
        None => Ok(RunConfig::default()),
    }
}

fn checkpoint_path(flag: Option<PathBuf>, cfg: &RunConfig) -> pts::Result<PathBuf> {
    flag.or_else(|| cfg.data.checkpoint.clone())
        .ok_or_else(|| pts::PtsError::Config("no checkpoint given (--checkpoint, PTS_CHECKPOINT or data.checkpoint)".into()))
}

fn run(command: Command) -> pts::Result<()> {
    match command {
        Command::Prepare { input, out_dir, config } => {
            let cfg = load_config(config)?;
            let p = cli::prepare(&input, &out_dir, &cfg)?;
            println!(
                "{} instances -> {} (vocab {}, keys {})",
                p.instances,
                p.dataset.display(),
                p.vocab_size,
                p.key_vocab_size
            );
        }
        Command::Annotate { input, out, stopwords } => {
            let sw = cli::load_stopwords(stopwords.as_deref())?;
            println!("annotated {} instances", cli::annotate(&input, &out, &sw)?);
        }
        Command::Synth { seed, n, distractors, out } => {
            println!("wrote {} instances", cli::synth(seed, n, distractors, &out)?);
        }
        Command::Train { config, log, seed } => {
            let cfg = RunConfig::load(&config)?;
            let r = cli::train(&cfg, log.as_deref(), seed)?;
            println!("steps={} best_bleu={:?} best_step={:?}", r.steps, r.best_bleu, r.best_step);
        }
        Command::Generate {
            checkpoint,
            dataset,
            out,
            config,
            max_iter,
            batch_size,
            gold_plan,
            stopwords,
        } => {
            let cfg = load_config(config)?;
            let checkpoint = checkpoint_path(checkpoint, &cfg)?;
            let sw = cli::load_stopwords(stopwords.as_deref().or(cfg.data.stopwords.as_deref()))?;
            let options = GenerateOptions {
                max_iter: max_iter.unwrap_or(cfg.decode.max_iter),
                batch_size: batch_size.unwrap_or(cfg.decode.batch_size),
                gold_plan,
            };
            let g = cli::generate(&checkpoint, &dataset, &out, &sw, &options)?;
            println!("wrote {} hypotheses to {}", g.len(), out.display());
        }
        Command::Evaluate {
            hypotheses,
            dataset,
            json,
            stopwords,
        } => {
            let sw = cli::load_stopwords(stopwords.as_deref())?;
            let r = cli::evaluate(&hypotheses, &dataset, &sw)?;
            print!("{}", if json { r.to_json() + "\n" } else { r.to_text() });
        }
        Command::Benchmark {
            checkpoint,
            dataset,
            config,
            max_iter,
            batch_size,
            gold_plan,
            stopwords,
        } => {
            let cfg = load_config(config)?;
            let checkpoint = checkpoint_path(checkpoint, &cfg)?;
            let sw = cli::load_stopwords(stopwords.as_deref().or(cfg.data.stopwords.as_deref()))?;
            let rows = cli::benchmark(&checkpoint, &dataset, &sw, &max_iter, &batch_size, gold_plan)?;
            print!("{}", cli::format_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
