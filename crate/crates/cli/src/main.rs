//! `music-embed`: learn pitch and interval embeddings from MIDI melodies.
//!
//! Exit status is 0 on success, 1 when a command fails at run time and 2
//! for usage errors (bad flags, config values or queries).

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use music_embed::seqmodel::Optimizer;
use music_embed::Variant;

use config::PipelineConfig;

/// A mistake in how the tool was invoked, as opposed to a failure while running.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "music-embed", version, about = "Pitch and interval embeddings from monophonic MIDI")]
struct Cli {
    /// Seed for initialisation, shuffling and t-SNE.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON pipeline configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Read .mid files (directories are searched recursively) into a piece corpus.
    Ingest { paths: Vec<PathBuf> },
    /// Turn a piece corpus into a training dataset.
    Build {
        /// Piece corpus [default: <out>/pieces.txt]
        corpus: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
    },
    /// Train embeddings on a dataset.
    Train {
        /// Dataset [default: <out>/dataset-<variant>.txt]
        dataset: Option<PathBuf>,
        /// Picks the default dataset file when no path is given.
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Project trained embeddings to 2-D or 3-D with t-SNE.
    Project {
        /// Checkpoint [default: <out>/checkpoint.bin]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        dims: Option<u8>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Print the nearest neighbors of query tokens.
    Neighbors {
        /// Checkpoint [default: <out>/checkpoint.bin]
        checkpoint: Option<PathBuf>,
        /// Note name (C5, A#4), pitch number, or signed interval. Repeatable.
        #[arg(long, allow_negative_numbers = true)]
        query: Vec<String>,
        #[arg(long)]
        k: Option<usize>,
        /// Also write neighbors-<query>.csv to the output directory.
        #[arg(long)]
        csv: bool,
    },
    /// Render a 2-D projection table as SVG.
    Plot {
        /// Projection table [default: <out>/projection.tsv]
        projection: Option<PathBuf>,
        /// Checkpoint used to find the neighbors of --query.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, requires = "checkpoint", allow_negative_numbers = true)]
        query: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// File name inside the output directory.
        #[arg(long, default_value = "plot.svg")]
        output: String,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_parser = ["adam", "sgd"])]
    optimizer: Option<String>,
}

impl TrainArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        let t = &mut cfg.train;
        t.embedding_dim = self.dim.unwrap_or(t.embedding_dim);
        t.hidden_size = self.hidden.unwrap_or(t.hidden_size);
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.learning_rate = self.learning_rate.unwrap_or(t.learning_rate);
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.window = self.window.unwrap_or(t.window);
        if let Some(o) = self.optimizer {
            t.optimizer = if o == "sgd" { Optimizer::Sgd } else { Optimizer::Adam };
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.out = cli.out.unwrap_or(cfg.out);

    match cli.command {
        Command::Ingest { paths } => {
            if !paths.is_empty() {
                cfg.inputs = paths;
            }
            cfg.validate()?;
            commands::ingest(&cfg)
        }
        Command::Build { corpus, variant } => {
            cfg.variant = variant.unwrap_or(cfg.variant);
            cfg.validate()?;
            commands::build(&cfg, corpus)
        }
        Command::Train { dataset, variant, args } => {
            cfg.variant = variant.unwrap_or(cfg.variant);
            args.apply(&mut cfg);
            cfg.validate()?;
            commands::train(&cfg, dataset)
        }
        Command::Project { checkpoint, dims, perplexity, iterations } => {
            let p = &mut cfg.projection;
            p.dims = dims.map_or(p.dims, usize::from);
            p.perplexity = perplexity.unwrap_or(p.perplexity);
            p.iterations = iterations.unwrap_or(p.iterations);
            cfg.validate()?;
            commands::project(&cfg, checkpoint)
        }
        Command::Neighbors { checkpoint, query, k, csv } => {
            if !query.is_empty() {
                cfg.queries = query;
            }
            cfg.k = k.unwrap_or(cfg.k);
            cfg.validate()?;
            commands::neighbors(&cfg, checkpoint, csv)
        }
        Command::Plot { projection, checkpoint, query, k, output } => {
            cfg.k = k.unwrap_or(cfg.k);
            cfg.validate()?;
            commands::plot(&cfg, projection, checkpoint, query, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
