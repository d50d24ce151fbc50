//! Command-line front end: library building, generation, head training and
//! dataset inspection.
//!
//! Exit codes: 0 on success, 1 for command-line usage errors, 2 for data or
//! processing errors.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use gesture_synth::dataset::{self, IngestOptions};
use gesture_synth::export;
use gesture_synth::library::{BuildConfig, GestureLibrary};
use gesture_synth::pipeline::{self, GenerationConfig, TextModels};
use gesture_synth::signal::Waveform;
use gesture_synth::text::{self, EmbeddingTable, LinearHead, TrainParams};
use gesture_synth::{Error, GestureType, Result};

#[derive(Parser)]
#[command(name = "gesture-synth", version, about = "Co-speech gesture synthesis from text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a gesture library directory from a dataset file.
    BuildLib {
        /// Dataset file, one JSON record per line.
        dataset: PathBuf,
        /// Output library directory (created if missing).
        out_dir: PathBuf,
        /// Clustering seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Imagistic cluster count; defaults to sqrt(n / 2).
        #[arg(long)]
        k: Option<usize>,
        /// Library frame rate; source clips are resampled to it.
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Embedding table used to attach word vectors to clusters.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Generate a motion clip for a line of text.
    Gen {
        #[arg(long)]
        text: String,
        /// Optional speech recording (16-bit PCM WAV) to align against.
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Library directory from build-lib.
        #[arg(long)]
        lib: PathBuf,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Steer the clip back to the rest pose at the end.
        #[arg(long)]
        rest: bool,
        /// Speaking rate for the duration model.
        #[arg(long, default_value_t = 150.0)]
        wpm: f64,
        /// Embedding table; defaults to a built-in single-row table.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Trained gesture-type head; defaults to an untrained head.
        #[arg(long)]
        types_head: Option<PathBuf>,
        /// Trained word-importance head; defaults to an untrained head.
        #[arg(long)]
        words_head: Option<PathBuf>,
    },
    /// Train the three-class gesture-type head.
    TrainTypes {
        /// Lines of {"words": [...], "types": [...], "split": "train"}.
        data: PathBuf,
        /// Embedding table file.
        embeddings: PathBuf,
        /// Output head file.
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
    },
    /// Train the binary word-importance head.
    TrainWords {
        /// Lines of {"words": [...], "important": [...], "split": "train"}.
        data: PathBuf,
        /// Embedding table file.
        embeddings: PathBuf,
        /// Output head file.
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
    },
    /// Validate a dataset file and print its manifest.
    Stats {
        /// Dataset file to inspect.
        dataset: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Bvh,
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildLib { dataset, out_dir, seed, k, fps, embeddings } => {
            let (records, manifest) = dataset::ingest(&dataset, &ingest_options(fps))?;
            let table = match embeddings {
                Some(path) => EmbeddingTable::load(&path)?,
                None => EmbeddingTable::new(1),
            };
            let config = BuildConfig { fps, k, seed, ..BuildConfig::default() };
            let library = GestureLibrary::build(&records, &table, &config)?;
            library.save(&out_dir)?;
            println!(
                "built library at {}: {} beat, {} imagistic ({} clusters), {} nogesture",
                out_dir.display(),
                library.meta.counts.beat,
                library.meta.counts.imagistic,
                library.meta.k,
                library.meta.counts.nogesture,
            );
            log::info!("source dataset: {} records from {}", manifest.total, manifest.path);
            Ok(())
        }
        Command::Gen {
            text,
            audio,
            lib,
            out,
            format,
            seed,
            rest,
            wpm,
            embeddings,
            types_head,
            words_head,
        } => {
            let library = GestureLibrary::load(&lib)?;
            let models = load_models(embeddings.as_deref(), types_head.as_deref(), words_head.as_deref())?;
            let waveform = audio.as_deref().map(Waveform::load_wav).transpose()?;
            let config = GenerationConfig {
                seed,
                end_at_rest: rest,
                words_per_minute: wpm,
                ..GenerationConfig::default()
            };
            let result =
                pipeline::generate(&text, waveform.as_ref(), &library, &models, &config)?;
            match format {
                OutputFormat::Json => {
                    export::save_motion_json(&out, &result.clip, &library.meta.skeleton)?
                }
                OutputFormat::Bvh => export::save_bvh(&out, &result.clip, &library.meta.skeleton)?,
            }
            println!(
                "wrote {} ({} frames, {:.2}s, {} spans)",
                out.display(),
                result.clip.frame_count(),
                result.total_seconds,
                result.spans.len(),
            );
            Ok(())
        }
        Command::TrainTypes { data, embeddings, out, lr, epochs } => {
            let table = EmbeddingTable::load(&embeddings)?;
            let (examples, splits) = load_type_examples(&data, &table)?;
            println!("split sizes: {splits}");
            let params = TrainParams { learning_rate: lr, epochs };
            let head = text::train_head(&examples, GestureType::ALL.len(), &params)?;
            report_training(&head, &examples, |logits, label| argmax(logits) == label)?;
            head.save(&out)?;
            println!("wrote types head to {}", out.display());
            Ok(())
        }
        Command::TrainWords { data, embeddings, out, lr, epochs } => {
            let table = EmbeddingTable::load(&embeddings)?;
            let (examples, splits) = load_word_examples(&data, &table)?;
            println!("split sizes: {splits}");
            let params = TrainParams { learning_rate: lr, epochs };
            let head = text::train_head(&examples, 1, &params)?;
            report_training(&head, &examples, |logits, label| (logits[0] >= 0.0) == (label == 1))?;
            head.save(&out)?;
            println!("wrote words head to {}", out.display());
            Ok(())
        }
        Command::Stats { dataset } => {
            let (_, manifest) = dataset::ingest(&dataset, &IngestOptions::default())?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(())
        }
    }
}

fn ingest_options(fps: f64) -> IngestOptions {
    IngestOptions { target_fps: Some(fps), ..IngestOptions::default() }
}

/// Assembles generation models from whichever artifacts were given, filling
/// gaps with the built-in fallbacks (untrained heads, single-row table).
fn load_models(
    embeddings: Option<&Path>,
    types_head: Option<&Path>,
    words_head: Option<&Path>,
) -> Result<TextModels> {
    let fallback = TextModels::fallback();
    let table = match embeddings {
        Some(path) => EmbeddingTable::load(path)?,
        None => fallback.table,
    };
    let classifier = match types_head {
        Some(path) => LinearHead::load(path)?,
        None => LinearHead::zeros(GestureType::ALL.len(), table.dim())?,
    };
    let selector = match words_head {
        Some(path) => LinearHead::load(path)?,
        None => LinearHead::zeros(1, table.dim())?,
    };
    Ok(TextModels { table, classifier, selector })
}

#[derive(serde::Deserialize)]
struct TypesLine {
    words: Vec<String>,
    types: Vec<String>,
    #[serde(default)]
    split: Option<String>,
}

#[derive(serde::Deserialize)]
struct WordsLine {
    words: Vec<String>,
    #[serde(default)]
    important: Vec<String>,
    #[serde(default)]
    split: Option<String>,
}

/// Per-split example counts, formatted for the training report.
struct SplitSizes {
    train: usize,
    other: std::collections::BTreeMap<String, usize>,
}

impl std::fmt::Display for SplitSizes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "train={}", self.train)?;
        for (name, count) in &self.other {
            write!(f, " {name}={count}")?;
        }
        Ok(())
    }
}

fn read_train_lines<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let content = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line)
            .map_err(|e| Error::Dataset { line: i + 1, msg: e.to_string() })?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

/// Flattens sentence-level type annotations into per-word train examples.
/// Only the `train` split (the default when absent) is trained on; other
/// splits are counted for the report.
fn load_type_examples(
    path: &Path,
    table: &EmbeddingTable,
) -> Result<(Vec<text::TrainExample>, SplitSizes)> {
    let mut examples = Vec::new();
    let mut sizes = SplitSizes { train: 0, other: Default::default() };
    for (line, row) in read_train_lines::<TypesLine>(path)? {
        if row.words.len() != row.types.len() {
            return Err(Error::Dataset {
                line,
                msg: format!("{} words but {} types", row.words.len(), row.types.len()),
            });
        }
        let split = row.split.as_deref().unwrap_or("train");
        if split != "train" {
            *sizes.other.entry(split.to_string()).or_insert(0) += row.words.len();
            continue;
        }
        sizes.train += row.words.len();
        let tokens = text::embed(&row.words, table)?;
        for (token, ty) in tokens.iter().zip(&row.types) {
            let label: GestureType = ty
                .parse()
                .map_err(|e: Error| Error::Dataset { line, msg: e.to_string() })?;
            examples.push((token.embedding.clone(), label.class_index()));
        }
    }
    Ok((examples, sizes))
}

/// Builds binary importance examples: a word labels 1 when listed in its
/// line's `important` set.
fn load_word_examples(
    path: &Path,
    table: &EmbeddingTable,
) -> Result<(Vec<text::TrainExample>, SplitSizes)> {
    let mut examples = Vec::new();
    let mut sizes = SplitSizes { train: 0, other: Default::default() };
    for (line, row) in read_train_lines::<WordsLine>(path)? {
        for w in &row.important {
            if !row.words.contains(w) {
                return Err(Error::Dataset {
                    line,
                    msg: format!("important word {w:?} is not in the words list"),
                });
            }
        }
        let split = row.split.as_deref().unwrap_or("train");
        if split != "train" {
            *sizes.other.entry(split.to_string()).or_insert(0) += row.words.len();
            continue;
        }
        sizes.train += row.words.len();
        let tokens = text::embed(&row.words, table)?;
        for (token, word) in tokens.iter().zip(&row.words) {
            let label = usize::from(row.important.contains(word));
            examples.push((token.embedding.clone(), label));
        }
    }
    Ok((examples, sizes))
}

fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate().skip(1) {
        if *v > logits[best] {
            best = i;
        }
    }
    best
}

fn report_training(
    head: &LinearHead,
    examples: &[text::TrainExample],
    correct: impl Fn(&[f64], usize) -> bool,
) -> Result<()> {
    let loss = head.loss(examples)?;
    let mut hits = 0usize;
    for (x, y) in examples {
        if correct(&head.logits(x)?, *y) {
            hits += 1;
        }
    }
    println!("final loss: {loss:.6}");
    println!(
        "train accuracy: {:.1}% ({hits}/{})",
        100.0 * hits as f64 / examples.len() as f64,
        examples.len()
    );
    Ok(())
}
