//! `herman`: quantity tagging, data synthesis, training, verification,
//! re-ranking and evaluation from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "herman", version, about = "Detect and verify quantities in summaries, and re-rank beams by faithfulness")]
struct Cli {
    /// Flat key=value settings file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Extra setting as KEY=VALUE, applied after the config file (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tag quantity entities in the articles and summaries of a corpus.
    TagQuantities(TagArgs),
    /// Build VERIFIED/UNVERIFIED training pairs from a corpus.
    GenData(GenDataArgs),
    /// Train a model on a generated dataset and write a checkpoint.
    Train(TrainArgs),
    /// Tag and score each summary of a corpus or dataset with a trained model.
    Verify(VerifyArgs),
    /// Pick one candidate per beam.
    Rerank(RerankArgs),
    /// Score re-ranked beams or verification output against references.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct TagArgs {
    /// Corpus JSONL with {id, article, summary} per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output JSONL of {id, article_spans, summary_spans}.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Corpus JSONL with {id, article, summary} per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output dataset JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for replacement choices.
    #[arg(long)]
    seed: Option<u64>,
    /// Article length limit in tokens.
    #[arg(long)]
    max_article: Option<usize>,
    /// Summary length limit in tokens.
    #[arg(long)]
    max_summary: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset JSONL written by gen-data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Validation dataset; when absent, a share of the records is held out.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Share of record ids held out for validation when --val is absent.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Checkpoint to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log JSONL; defaults to the checkpoint path plus `.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Pretrained word vectors, one `word v1 v2 ...` per line.
    #[arg(long)]
    embedding_file: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

/// Model and optimizer settings; `--set` reaches the remaining ones.
#[derive(Debug, Args)]
struct ModelArgs {
    /// Weight of the tagging loss against the summary-level loss, in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// LSTM hidden size per direction.
    #[arg(long)]
    hidden: Option<usize>,
    /// Word embedding size.
    #[arg(long)]
    embed: Option<usize>,
    /// Vocabulary size including padding and unknown.
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Independently seeded runs (seed, seed+1, ...); the lowest validation loss wins.
    #[arg(long)]
    restarts: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Global gradient-norm bound.
    #[arg(long)]
    clip_norm: Option<f64>,
    /// `sequence` or `token-marginal`.
    #[arg(long)]
    loss_mode: Option<String>,
    #[arg(long)]
    max_article: Option<usize>,
    #[arg(long)]
    max_summary: Option<usize>,
    /// Seed for initialization and shuffling.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Corpus or dataset JSONL; each line needs id, article and summary.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RerankArgs {
    /// Beam JSONL: {id, article, candidates: [{text, beam_rank, model_score?}]}.
    #[arg(long)]
    beams: Option<PathBuf>,
    /// Trained model; required by the global and local scorers.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// `global`, `local`, `shortest` or `max-overlap`.
    #[arg(long)]
    scorer: Option<String>,
    /// What the local scorer averages: `marginals` or `viterbi`.
    #[arg(long)]
    local_source: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Re-ranked beams or verify output.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Reference corpus (for beams) or gen-data dataset (for verify output).
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// JSON report to write.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::load(cli.config.as_deref())?;
    for kv in &cli.overrides {
        let parsed = Settings::parse(kv)?;
        for (k, v) in parsed.entries() {
            s.set(k, Some(v));
        }
    }
    Ok(s)
}

fn path_flag(s: &mut Settings, key: &str, flag: &Option<PathBuf>) {
    s.set(key, flag.as_ref().map(|p| p.display().to_string()));
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut s = settings(&cli)?;
    match &cli.command {
        Command::TagQuantities(a) => {
            path_flag(&mut s, "corpus", &a.corpus);
            path_flag(&mut s, "out", &a.out);
            commands::tag_quantities(s)
        }
        Command::GenData(a) => {
            path_flag(&mut s, "corpus", &a.corpus);
            path_flag(&mut s, "out", &a.out);
            s.set("seed", a.seed);
            s.set("max_article", a.max_article);
            s.set("max_summary", a.max_summary);
            commands::gen_data(s)
        }
        Command::Train(a) => {
            path_flag(&mut s, "dataset", &a.dataset);
            path_flag(&mut s, "val", &a.val);
            path_flag(&mut s, "out", &a.out);
            path_flag(&mut s, "log", &a.log);
            path_flag(&mut s, "embedding_file", &a.embedding_file);
            s.set("val_fraction", a.val_fraction);
            let m = &a.model;
            s.set("alpha", m.alpha);
            s.set("lr", m.lr);
            s.set("hidden", m.hidden);
            s.set("embed", m.embed);
            s.set("vocab", m.vocab);
            s.set("batch_size", m.batch_size);
            s.set("max_epochs", m.max_epochs);
            s.set("restarts", m.restarts);
            s.set("patience", m.patience);
            s.set("clip_norm", m.clip_norm);
            s.set("loss_mode", m.loss_mode.clone());
            s.set("max_article", m.max_article);
            s.set("max_summary", m.max_summary);
            s.set("seed", m.seed);
            commands::train(s)
        }
        Command::Verify(a) => {
            path_flag(&mut s, "input", &a.input);
            path_flag(&mut s, "checkpoint", &a.checkpoint);
            path_flag(&mut s, "out", &a.out);
            commands::verify(s)
        }
        Command::Rerank(a) => {
            path_flag(&mut s, "beams", &a.beams);
            path_flag(&mut s, "checkpoint", &a.checkpoint);
            path_flag(&mut s, "out", &a.out);
            s.set("scorer", a.scorer.clone());
            s.set("local_source", a.local_source.clone());
            commands::rerank(s)
        }
        Command::Evaluate(a) => {
            path_flag(&mut s, "pred", &a.pred);
            path_flag(&mut s, "ref", &a.reference);
            path_flag(&mut s, "report", &a.report);
            commands::evaluate(s)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
