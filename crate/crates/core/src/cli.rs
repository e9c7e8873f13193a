//! Command-line surface: data synthesis, staged training, tokenization,
//! captioning, generation, evaluation and token-context export.
//!
//! Exit codes: 0 success, 2 usage error, 3 missing dependency,
//! 4 numerical failure, 1 everything else.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline;

pub const CKPT_DIR_ENV: &str = "MOTIONTEXT_CKPT_DIR";

#[derive(Parser)]
#[command(
    name = "motiontext",
    about = "Discrete motion tokens and bidirectional motion/text translation",
    version
)]
pub struct Cli {
    /// Key-value config file (preset inheritance via `preset = ...`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. --set vq.steps=500 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Checkpoint directory (default: $MOTIONTEXT_CKPT_DIR or ./checkpoints).
    #[arg(long, global = true)]
    ckpt_dir: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Vq,
    M2t,
    T2m,
    Extractors,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic motion-language corpus.
    SynthData {
        /// Output corpus file (line-delimited records).
        #[arg(long, default_value = "corpus.jsonl")]
        out: PathBuf,
    },
    /// Train one pipeline stage.
    Train {
        stage: Stage,
        /// Corpus file.
        #[arg(long)]
        corpus: PathBuf,
        /// Train the text2motion baseline without inverse alignment.
        #[arg(long)]
        no_inverse_alignment: bool,
        /// Overwrite checkpoints from a different configuration.
        #[arg(long)]
        force: bool,
    },
    /// Convert every corpus motion to its token stream.
    Tokenize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "tokens.jsonl")]
        out: PathBuf,
    },
    /// Caption motions from a corpus file.
    Caption {
        /// Motion file (corpus format).
        #[arg(long)]
        motions: PathBuf,
        /// Beam width (1 = greedy).
        #[arg(long, default_value_t = crate::m2t::DEFAULT_BEAM)]
        beam: usize,
        #[arg(long, default_value = "captions.jsonl")]
        out: PathBuf,
    },
    /// Generate motions from a text description.
    Generate {
        text: String,
        /// Comma-separated RNG seeds, one generation per seed.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, default_value = "generations.jsonl")]
        out: PathBuf,
        /// Write static SVG trajectory plots into this directory.
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
    /// Run the full metric suite over the test split.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "eval_out")]
        out_dir: PathBuf,
    },
    /// Export the 4-frame motion segment behind every codebook entry.
    TokenContexts {
        #[arg(long, default_value = "token_contexts.jsonl")]
        out: PathBuf,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::desk(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    Ok(cfg)
}

fn ckpt_dir(cli: &Cli) -> PathBuf {
    cli.ckpt_dir
        .clone()
        .or_else(|| std::env::var_os(CKPT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("checkpoints"))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| Error::Usage(format!("bad seed {p:?}: {e}")))
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    let dir = ckpt_dir(&cli);
    match &cli.cmd {
        Cmd::SynthData { out } => {
            let (train, test, val) = pipeline::cmd_synth_data(&cfg, out)?;
            let (_, hash) = pipeline::load_corpus(out)?;
            println!(
                "wrote {} ({} train / {} test / {} val), corpus hash {hash}",
                out.display(),
                train,
                test,
                val
            );
        }
        Cmd::Train { stage, corpus, no_inverse_alignment, force } => {
            let (corpus, hash) = pipeline::load_corpus(corpus)?;
            let path = match stage {
                Stage::Vq => pipeline::train_stage_vq(&cfg, &corpus, &hash, &dir, *force)?,
                Stage::Extractors => {
                    pipeline::train_stage_extractors(&cfg, &corpus, &hash, &dir, *force)?
                }
                Stage::M2t => pipeline::train_stage_m2t(&cfg, &corpus, &hash, &dir, *force)?,
                Stage::T2m => pipeline::train_stage_t2m(
                    &cfg,
                    &corpus,
                    &hash,
                    &dir,
                    !no_inverse_alignment,
                    *force,
                )?,
            };
            println!("trained {:?} -> {}", stage, path.display());
        }
        Cmd::Tokenize { corpus, out } => {
            let n = pipeline::run_tokenize(&dir, corpus, out)?;
            println!("tokenized {n} motions -> {}", out.display());
        }
        Cmd::Caption { motions, beam, out } => {
            if *beam == 0 {
                return Err(Error::Usage("beam width must be at least 1".into()));
            }
            let records = pipeline::run_caption(&dir, motions, *beam, out)?;
            println!("captioned {} motions -> {}", records.len(), out.display());
        }
        Cmd::Generate { text, seeds, out, plot_dir } => {
            let seeds = parse_seeds(seeds)?;
            if seeds.is_empty() {
                return Err(Error::Usage("generate needs at least one seed".into()));
            }
            let records = pipeline::run_generate(&dir, text, &seeds, out, plot_dir.as_deref())?;
            for r in &records {
                if !r.unknown_words.is_empty() {
                    eprintln!("warning: unknown words mapped to UNK: {:?}", r.unknown_words);
                }
            }
            println!("generated {} motions -> {}", records.len(), out.display());
        }
        Cmd::Evaluate { corpus, out_dir } => {
            let (corpus, hash) = pipeline::load_corpus(corpus)?;
            let report = pipeline::run_evaluate(&cfg, &corpus, &hash, &dir, out_dir)?;
            print!("{}", report.to_text());
            println!("reports written to {}", out_dir.display());
        }
        Cmd::TokenContexts { out } => {
            let n = pipeline::run_token_contexts(&dir, out)?;
            println!("exported {n} token contexts -> {}", out.display());
        }
    }
    Ok(())
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
