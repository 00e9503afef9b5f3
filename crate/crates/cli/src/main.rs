mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bertcnn::Error;

#[derive(Parser, Debug)]
#[command(name = "bertcnn", version, about = "Offensive-language classification: data prep, training, evaluation, prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stratified train/dev split of a labeled TSV.
    Prep(PrepArgs),
    /// Train a classifier and keep the best dev epoch.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled TSV.
    Eval(EvalArgs),
    /// Write per-tweet probabilities and labels for a TSV.
    Predict(PredictArgs),
    /// Class counts of one or more labeled TSVs.
    Distribution(DistributionArgs),
}

#[derive(Args, Debug)]
pub struct PrepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = bertcnn::corpus::DEFAULT_SPLIT_RATIO)]
    pub ratio: f64,
    #[arg(long, default_value_t = bertcnn::corpus::DEFAULT_SPLIT_SEED)]
    pub seed: u64,
}

/// Every option is optional here so that config-file values and built-in
/// defaults can fill the gaps; see `config::RunConfig::resolve`.
#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// key = value file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bert_cnn, bert, cnn_text, bilstm or svm_tfidf.
    #[arg(long)]
    pub model: Option<String>,
    /// ar, el or tr.
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Dev TSV; without it the training file is split.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Encoder checkpoint directory.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Seeded small in-repo encoder (4 layers, hidden 16, 2 heads).
    #[arg(long)]
    pub tiny_encoder: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Global gradient-norm bound; 0 disables clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub lowercase: bool,
    /// Size cap for a vocabulary built from the training data.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Filters per convolution width.
    #[arg(long)]
    pub filters: Option<usize>,
    /// TF-IDF vocabulary size.
    #[arg(long)]
    pub features: Option<usize>,
    /// tf_idf or counts.
    #[arg(long)]
    pub weighting: Option<String>,
    #[arg(long)]
    pub svm_c: Option<f64>,
    /// Keep a checkpoint for every epoch, not only improving ones.
    #[arg(long)]
    pub save_all_epochs: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint directory, or a run directory with a `best` pointer.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Report JSON path; a plain-text table is written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset name recorded in the report (defaults to the file stem).
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DistributionArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Also write the counts as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let message = message.replace('\n', " ");
    eprintln!("error: kind={kind} message={message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("usage", first, 1);
        }
    };
    let result = match cli.command {
        Command::Prep(a) => commands::prep(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Distribution(a) => commands::distribution(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), if e.is_usage() { 1 } else { 2 }),
    }
}

pub type CliResult = Result<(), Error>;
