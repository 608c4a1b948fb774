use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use music_embed::analysis::{
    export_projector, nearest_neighbors, parse_projection_tsv, parse_query, plot_projection, projection_tsv,
    report_csv, report_table, token_label, AnalysisError, Highlight,
};
use music_embed::corpus::{self, TrainingCorpus};
use music_embed::midi::melodies_from_smf;
use music_embed::seqmodel::{self, loss_history_csv, Checkpoint};
use music_embed::tsne::{compute_affinities, tsne_optimize, TsneConfig};
use music_embed::{Matrix, PitchSequence, Token, Variant};

use crate::config::PipelineConfig;
use crate::manifest::{self, Entry};
use crate::UsageError;

pub const PIECES_FILE: &str = "pieces.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const PROJECTION_FILE: &str = "projection.tsv";

fn dataset_file(variant: Variant) -> String {
    format!("dataset-{variant}.txt")
}

fn write(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

/// Query parse failures are the caller's mistake, so they become usage errors.
fn resolve_query(input: &str, variant: Variant) -> anyhow::Result<Token> {
    parse_query(input, variant).map_err(|e| UsageError(e.to_string()).into())
}

fn collect_midi(path: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if path.is_dir() {
        let mut entries = std::fs::read_dir(path)
            .with_context(|| format!("listing {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()?;
        entries.sort();
        for entry in entries {
            let is_midi = entry
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
            if entry.is_dir() || is_midi {
                collect_midi(&entry, found)?;
            }
        }
    } else {
        found.push(path.to_path_buf());
    }
    Ok(())
}

pub fn ingest(cfg: &PipelineConfig) -> anyhow::Result<()> {
    if cfg.inputs.is_empty() {
        return Err(UsageError("ingest needs at least one .mid file or directory".into()).into());
    }
    let mut files = Vec::new();
    for input in &cfg.inputs {
        if !input.exists() {
            bail!("{} does not exist", input.display());
        }
        collect_midi(input, &mut files)?;
    }
    if files.is_empty() {
        bail!("no .mid files found under the given paths");
    }

    let mut pieces: Vec<PitchSequence> = Vec::new();
    let mut failed = 0;
    for file in &files {
        let name = file.display().to_string();
        let melodies = std::fs::read(file)
            .map_err(anyhow::Error::from)
            .and_then(|bytes| melodies_from_smf(&bytes, &name).map_err(Into::into));
        let melodies = match melodies {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {name}: {e}");
                failed += 1;
                continue;
            }
        };
        if melodies.is_empty() {
            eprintln!("warning: {name}: no notes");
        }
        for melody in melodies {
            match melody {
                Ok(m) => {
                    println!("{}: {} notes", m.sequence.source_id(), m.sequence.len());
                    if m.had_chords() {
                        eprintln!(
                            "warning: {}: dropped {} chord notes, kept the highest pitch",
                            m.sequence.source_id(),
                            m.dropped
                        );
                    }
                    pieces.push(m.sequence);
                }
                Err(e) => eprintln!("warning: {name}: track skipped: {e}"),
            }
        }
    }
    if failed == files.len() {
        bail!("none of the {} input files could be read", files.len());
    }
    if pieces.is_empty() {
        bail!("no melody with at least two notes was found");
    }
    let corpus = corpus::build_control(&pieces)?;
    let path = write(&cfg.out, PIECES_FILE, corpus.to_text())?;
    println!("{} pieces from {} files -> {}", pieces.len(), files.len() - failed, path.display());
    manifest::record(&cfg.out, Entry { command: "ingest", config: cfg, inputs: files, outputs: vec![path] })
}

pub fn build(cfg: &PipelineConfig, corpus_path: Option<PathBuf>) -> anyhow::Result<()> {
    let input = corpus_path.unwrap_or_else(|| cfg.out.join(PIECES_FILE));
    let pieces = TrainingCorpus::from_text(&read_text(&input)?)
        .and_then(|c| c.pieces())
        .with_context(|| format!("parsing {}", input.display()))?;
    let dataset = corpus::build(cfg.variant, &pieces)?;
    let vocab = dataset.vocabulary();
    println!("Variant:    {}", cfg.variant);
    println!("Total:      {}", vocab.len());
    println!("{} sequences, {} tokens", dataset.sequences().len(), dataset.token_count());
    let labels: Vec<String> = vocab.tokens().iter().map(|&t| token_label(t, cfg.variant)).collect();
    println!("Vocabulary: {}", labels.join(" "));
    let path = write(&cfg.out, &dataset_file(cfg.variant), dataset.to_text())?;
    println!("-> {}", path.display());
    manifest::record(&cfg.out, Entry { command: "build", config: cfg, inputs: vec![input], outputs: vec![path] })
}

pub fn train(cfg: &PipelineConfig, dataset_path: Option<PathBuf>) -> anyhow::Result<()> {
    let input = dataset_path.unwrap_or_else(|| cfg.out.join(dataset_file(cfg.variant)));
    let dataset =
        TrainingCorpus::from_text(&read_text(&input)?).with_context(|| format!("parsing {}", input.display()))?;
    println!(
        "training on {} ({} variant, {} tokens, vocabulary {}), D={} H={}",
        input.display(),
        dataset.variant(),
        dataset.token_count(),
        dataset.vocabulary().len(),
        cfg.train.embedding_dim,
        cfg.train.hidden_size
    );
    let cfg = &PipelineConfig { variant: dataset.variant(), ..cfg.clone() };
    let outcome = seqmodel::train::<f32>(&dataset, &cfg.train)?;
    if let (Some(first), Some(last)) = (outcome.loss_history.first(), outcome.loss_history.last()) {
        println!("loss {first:.4} -> {last:.4} over {} epochs", outcome.loss_history.len());
    }
    let checkpoint = Checkpoint { variant: dataset.variant(), config: cfg.train.clone(), model: outcome.model };
    let ckpt = write(&cfg.out, CHECKPOINT_FILE, checkpoint.to_bytes())?;
    let loss = write(&cfg.out, "loss.csv", loss_history_csv(&outcome.loss_history))?;
    let labels: Vec<String> =
        checkpoint.vocabulary().tokens().iter().map(|&t| token_label(t, checkpoint.variant)).collect();
    let (vectors, metadata) = export_projector(&checkpoint.model.embedding, &labels)?;
    let vectors = write(&cfg.out, "embedding-vectors.tsv", vectors)?;
    let metadata = write(&cfg.out, "embedding-metadata.tsv", metadata)?;
    println!("-> {}", ckpt.display());
    manifest::record(
        &cfg.out,
        Entry { command: "train", config: cfg, inputs: vec![input], outputs: vec![ckpt, loss, vectors, metadata] },
    )
}

/// Perplexity must stay well below the point count; small vocabularies
/// (interval datasets) get `(V - 1) / 3`, never less than 2.
fn usable_perplexity(requested: f64, points: usize) -> f64 {
    let ceiling = ((points.saturating_sub(1)) as f64 / 3.0).max(2.0);
    requested.min(ceiling)
}

pub fn project(cfg: &PipelineConfig, checkpoint_path: Option<PathBuf>) -> anyhow::Result<()> {
    let input = checkpoint_path.unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    let checkpoint = load_checkpoint(&input)?;
    let variant = checkpoint.variant;
    let cfg = &PipelineConfig { variant, ..cfg.clone() };
    let weights: Matrix<f64> = checkpoint.model.embedding.weights().cast();
    let points = weights.rows();
    let perplexity = usable_perplexity(cfg.projection.perplexity, points);
    if perplexity < cfg.projection.perplexity {
        eprintln!(
            "warning: perplexity {} is too large for {points} embeddings, using {perplexity:.3}",
            cfg.projection.perplexity
        );
    }
    let affinities = compute_affinities(&weights, perplexity)?;
    let tsne = TsneConfig {
        dims: cfg.projection.dims,
        perplexity,
        iterations: cfg.projection.iterations,
        seed: cfg.seed,
        ..TsneConfig::default()
    };
    let tokens = checkpoint.vocabulary().tokens().to_vec();
    let labels = tokens.iter().map(|&t| token_label(t, variant)).collect();
    let projection = tsne_optimize(&affinities, &tsne)?.with_labels(tokens, labels);
    if let Some(kl) = projection.kl_history.last() {
        println!("{points} points, {}-D, final KL {kl:.4}", tsne.dims);
    }

    let mut outputs = vec![
        write(&cfg.out, PROJECTION_FILE, projection_tsv(&projection))?,
        write(&cfg.out, "kl.csv", projection.kl_csv())?,
    ];
    if tsne.dims == 2 {
        outputs.push(write(&cfg.out, "projection.svg", plot_projection(&projection, None)?)?);
    }
    for path in &outputs {
        println!("-> {}", path.display());
    }
    manifest::record(&cfg.out, Entry { command: "project", config: cfg, inputs: vec![input], outputs })
}

/// File-name-safe form of a query label.
fn slug(label: &str) -> String {
    label.replace('♯', "s").replace('-', "m")
}

pub fn neighbors(cfg: &PipelineConfig, checkpoint_path: Option<PathBuf>, csv: bool) -> anyhow::Result<()> {
    if cfg.queries.is_empty() {
        return Err(UsageError("neighbors needs at least one --query".into()).into());
    }
    let input = checkpoint_path.unwrap_or_else(|| cfg.out.join(CHECKPOINT_FILE));
    let checkpoint = load_checkpoint(&input)?;
    let variant = checkpoint.variant;
    let cfg = &PipelineConfig { variant, ..cfg.clone() };
    let queries = cfg.queries.iter().map(|q| resolve_query(q, variant)).collect::<anyhow::Result<Vec<_>>>()?;
    let embedding = &checkpoint.model.embedding;
    let mut outputs = Vec::new();
    for (i, &query) in queries.iter().enumerate() {
        let table = report_table(embedding, variant, query, cfg.k).map_err(|e| match e {
            AnalysisError::UnknownToken(t) => anyhow::anyhow!(
                "{} is not in the vocabulary of {} ({} tokens)",
                token_label(t, variant),
                input.display(),
                embedding.len()
            ),
            other => other.into(),
        })?;
        if i > 0 {
            println!();
        }
        print!("{table}");
        if csv {
            let report = nearest_neighbors(embedding, query, cfg.k)?;
            let name = format!("neighbors-{}.csv", slug(&token_label(query, variant)));
            outputs.push(write(&cfg.out, &name, report_csv(&report, variant))?);
        }
    }
    if csv {
        manifest::record(&cfg.out, Entry { command: "neighbors", config: cfg, inputs: vec![input], outputs })?;
    }
    Ok(())
}

pub fn plot(
    cfg: &PipelineConfig,
    projection_path: Option<PathBuf>,
    checkpoint_path: Option<PathBuf>,
    query: Option<String>,
    output: &str,
) -> anyhow::Result<()> {
    let input = projection_path.unwrap_or_else(|| cfg.out.join(PROJECTION_FILE));
    let projection =
        parse_projection_tsv(&read_text(&input)?).with_context(|| format!("parsing {}", input.display()))?;
    if projection.dims() != 2 {
        return Err(UsageError(format!(
            "{} is a {}-D projection; only 2-D projections can be plotted",
            input.display(),
            projection.dims()
        ))
        .into());
    }
    let mut inputs = vec![input];
    let highlight = match (checkpoint_path, query) {
        (Some(ckpt_path), Some(q)) => {
            let checkpoint = load_checkpoint(&ckpt_path)?;
            let query = resolve_query(&q, checkpoint.variant)?;
            let report = nearest_neighbors(&checkpoint.model.embedding, query, cfg.k)?;
            inputs.push(ckpt_path);
            Some(Highlight { query, neighbors: report.neighbors.iter().map(|(t, _)| *t).collect() })
        }
        _ => None,
    };
    let svg = plot_projection(&projection, highlight.as_ref())?;
    let path = write(&cfg.out, output, svg)?;
    println!("-> {}", path.display());
    manifest::record(&cfg.out, Entry { command: "plot", config: cfg, inputs, outputs: vec![path] })
}
