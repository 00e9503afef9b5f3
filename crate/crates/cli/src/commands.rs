use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bertcnn::archive::write_json;
use bertcnn::baselines::{BiLstmConfig, CnnTextConfig, SvmConfig, TfidfModel};
use bertcnn::corpus::{self, class_distribution, Distribution, LabeledTweet};
use bertcnn::encoder::EncoderConfig;
use bertcnn::metrics::{render_table, EvalReport, RunMetadata};
use bertcnn::preprocess::{basic_tokenize, normalize};
use bertcnn::training::{self, EpochRecord, RunHistory};
use bertcnn::{
    DataSplit, Error, HeadConfig, Label, ModelKind, NeuralClassifier, NeuralConfig, Pipeline32, Preprocessor, Result,
    Schema, TransformerEncoder, Vocabulary,
};

use crate::config::{io_error, RunConfig};
use crate::{DistributionArgs, EvalArgs, PredictArgs, PrepArgs, TrainArgs};

pub const BEST_FILE: &str = "best";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const DEV_REPORT_FILE: &str = "dev_report.json";

/// Contents of the `best` pointer file in a run directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct BestPointer {
    pub epoch: usize,
    pub checkpoint: String,
    pub dev_macro_f1: f64,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

pub fn prep(args: &PrepArgs) -> Result<()> {
    let schema = Schema::default();
    let data = corpus::load_tsv(&args.input, &schema)?;
    let split = corpus::split(&data, args.ratio, args.seed)?;
    split.write(&args.out, &schema)?;
    let m = split.manifest();
    println!(
        "train {} (NOT {}, OFF {}), dev {} (NOT {}, OFF {})",
        split.train.len(),
        m.counts.train.not,
        m.counts.train.off,
        split.dev.len(),
        m.counts.dev.not,
        m.counts.dev.off
    );
    Ok(())
}

fn epoch_dir(k: usize) -> String {
    format!("epoch-{k}")
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    let schema = Schema::default();
    let run_dir = cfg.run_dir();
    create_dir(&run_dir)?;
    write_json(run_dir.join(RUN_CONFIG_FILE), &cfg)?;

    let train_rows = corpus::load_tsv(&cfg.train, &schema)?;
    let split = match &cfg.dev {
        Some(dev) => {
            let dev = corpus::load_tsv(dev, &schema)?;
            let ratio = train_rows.len() as f64 / (train_rows.len() + dev.len()) as f64;
            DataSplit { train: train_rows, dev, seed: cfg.seed, ratio }
        }
        None => corpus::split(&train_rows, cfg.ratio, cfg.seed)?,
    };
    split.write(run_dir.join("split"), &schema)?;
    if split.dev.is_empty() {
        return Err(Error::Config("development set is empty".into()));
    }

    let (best, history) = if cfg.model == ModelKind::SvmTfidf {
        train_svm(&cfg, &split, &run_dir)?
    } else {
        train_neural(&cfg, &split, &run_dir)?
    };
    write_text(&run_dir.join(HISTORY_FILE), &history.to_jsonl()?)?;

    let confusion = best.evaluate(&split.dev)?;
    let report = EvalReport::new(confusion, metadata(&cfg, "dev"));
    write_json(run_dir.join(DEV_REPORT_FILE), &report)?;
    println!("best epoch {} dev macro-F1 {:.3}", history.best_epoch, history.best_score);
    Ok(())
}

fn metadata(cfg: &RunConfig, dataset: &str) -> RunMetadata {
    RunMetadata {
        model: cfg.model.display_name().into(),
        language: cfg.language.name().into(),
        seed: cfg.seed,
        dataset: dataset.into(),
    }
}

fn write_best(run_dir: &Path, epoch: usize, score: f64) -> Result<()> {
    let pointer = BestPointer { epoch, checkpoint: epoch_dir(epoch), dev_macro_f1: score };
    write_json(run_dir.join(BEST_FILE), &pointer)
}

fn train_svm(cfg: &RunConfig, split: &DataSplit, run_dir: &Path) -> Result<(Pipeline32, RunHistory)> {
    let start = std::time::Instant::now();
    let svm = SvmConfig { c: cfg.svm_c, seed: cfg.seed, ..SvmConfig::default() };
    let model = TfidfModel::fit(&split.train, cfg.language, cfg.features, cfg.weighting, &svm)?;
    let hinge = split
        .train
        .iter()
        .map(|t| {
            let y = if t.label == Label::Offensive { 1.0 } else { -1.0 };
            (1.0 - y * model.decision(&t.text)).max(0.0)
        })
        .sum::<f64>()
        / split.train.len() as f64;
    let mut pipeline = Pipeline32::svm(model);
    pipeline.seed = cfg.seed;
    let dev_f1 = pipeline.evaluate(&split.dev)?.macro_f1();
    let mut history = RunHistory::default();
    history.push(EpochRecord {
        epoch: 0,
        train_loss: hinge,
        dev_macro_f1: dev_f1,
        wall_seconds: start.elapsed().as_secs_f64(),
    });
    pipeline.save(run_dir.join(epoch_dir(0)))?;
    write_best(run_dir, 0, dev_f1)?;
    Ok((pipeline, history))
}

fn resolve_vocab(cfg: &RunConfig, train: &[LabeledTweet]) -> Result<Vocabulary> {
    if let Some(path) = &cfg.vocab {
        return Vocabulary::load(path);
    }
    if let Some(enc) = &cfg.encoder {
        let path = enc.join(bertcnn::pipeline::VOCAB_FILE);
        if path.is_file() {
            return Vocabulary::load(path);
        }
        return Err(Error::Config(format!(
            "encoder checkpoint {} has no vocab.txt; pass `--vocab`",
            enc.display()
        )));
    }
    let words: Vec<String> = train
        .iter()
        .flat_map(|t| {
            let text = normalize(&t.text, cfg.language);
            let text = if cfg.lowercase { text.to_lowercase() } else { text };
            basic_tokenize(&text)
        })
        .collect();
    Ok(Vocabulary::from_corpus(words.iter().map(String::as_str), cfg.vocab_size))
}

fn network_config(cfg: &RunConfig, vocab_size: usize, encoder: Option<EncoderConfig>) -> Result<NeuralConfig> {
    let mut c = match (cfg.model, encoder) {
        (ModelKind::BertCnn | ModelKind::Bert, Some(enc)) => {
            NeuralConfig::default_for(cfg.model, enc, vocab_size).expect("neural kind")
        }
        (ModelKind::CnnText, _) => NeuralConfig::CnnText(CnnTextConfig::new(vocab_size)),
        (ModelKind::Bilstm, _) => NeuralConfig::Bilstm(BiLstmConfig::new(vocab_size)),
        (kind, _) => return Err(Error::Contract(format!("no network config for `{kind}`"))),
    };
    match &mut c {
        NeuralConfig::BertCnn { head, .. } => {
            set_head(head, cfg);
        }
        NeuralConfig::Bert { dropout, .. } => *dropout = cfg.dropout,
        NeuralConfig::CnnText(t) => {
            t.dropout = cfg.dropout;
            if let Some(d) = cfg.embed_dim {
                t.embed_dim = d;
            }
            if let Some(f) = cfg.filters {
                t.filters_per_width = f;
            }
        }
        NeuralConfig::Bilstm(b) => {
            b.dropout = cfg.dropout;
            if let Some(d) = cfg.embed_dim {
                b.embed_dim = d;
            }
            if let Some(h) = cfg.hidden {
                b.hidden = h;
            }
            if let Some(l) = cfg.layers {
                b.layers = l;
            }
        }
    }
    Ok(c)
}

fn set_head(head: &mut HeadConfig, cfg: &RunConfig) {
    head.dropout = cfg.dropout;
    if let Some(f) = cfg.filters {
        head.filters_per_width = f;
    }
}

fn train_neural(cfg: &RunConfig, split: &DataSplit, run_dir: &Path) -> Result<(Pipeline32, RunHistory)> {
    let vocab = resolve_vocab(cfg, &split.train)?;
    let vocab_size = vocab.len();
    let mut preprocessor = Preprocessor::new(cfg.language, vocab, cfg.max_len);
    preprocessor.lowercase = cfg.lowercase;

    let model: NeuralClassifier<f32> = match &cfg.encoder {
        Some(dir) => {
            let (enc, store) = TransformerEncoder::load_checkpoint::<f32>(dir)?;
            if enc.config().vocab_size != vocab_size {
                return Err(Error::Config(format!(
                    "vocabulary has {vocab_size} tokens but the encoder expects {}",
                    enc.config().vocab_size
                )));
            }
            let net = network_config(cfg, vocab_size, Some(enc.config().clone()))?;
            NeuralClassifier::with_encoder(net, store, cfg.seed)?
        }
        None => {
            let enc = cfg.tiny_encoder.then(|| EncoderConfig::tiny(vocab_size));
            let net = network_config(cfg, vocab_size, enc)?;
            NeuralClassifier::init(net, cfg.seed)?
        }
    };

    let save_all = cfg.save_all_epochs;
    let pre = preprocessor.clone();
    let seed = cfg.seed;
    let mut on_epoch = |rec: &EpochRecord, m: &NeuralClassifier<f32>, improved: bool| -> Result<()> {
        if improved || save_all {
            let mut p = Pipeline32::neural(pre.clone(), m.clone())?;
            p.seed = seed;
            p.save(run_dir.join(epoch_dir(rec.epoch)))?;
        }
        if improved {
            write_best(run_dir, rec.epoch, rec.dev_macro_f1)?;
        }
        Ok(())
    };
    let (best, history) = training::train_split(model, split, &preprocessor, &cfg.training, &mut on_epoch)?;
    let mut pipeline = Pipeline32::neural(preprocessor, best)?;
    pipeline.seed = cfg.seed;
    Ok((pipeline, history))
}

/// Accepts a checkpoint directory or a run directory holding a `best`
/// pointer.
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    let pointer = path.join(BEST_FILE);
    if pointer.is_file() {
        let best: BestPointer = bertcnn::archive::read_json(&pointer)?;
        return Ok(path.join(best.checkpoint));
    }
    Ok(path.to_path_buf())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let schema = Schema::default();
    if !corpus::has_label_column(&args.test, &schema)? {
        return Err(Error::Config(format!(
            "{} has no `{}` column; use `predict` for unlabeled data",
            args.test.display(),
            schema.label
        )));
    }
    let pipeline = Pipeline32::load(resolve_checkpoint(&args.checkpoint)?)?;
    let data = corpus::load_tsv(&args.test, &schema)?;
    let confusion = pipeline.evaluate(&data)?;
    let dataset = args.dataset.clone().unwrap_or_else(|| {
        args.test.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    let kind = pipeline.kind();
    let language = pipeline.language();
    let report = EvalReport::new(
        confusion,
        RunMetadata {
            model: kind.display_name().into(),
            language: language.name().into(),
            seed: pipeline.seed,
            dataset,
        },
    );
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(&args.out, &report)?;
    let table = render_table(&[(kind.display_name().into(), language.name().into(), report.macro_f1)]);
    write_text(&args.out.with_extension("txt"), &table)?;
    println!("{:.3}", report.macro_f1);
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let schema = Schema::default();
    let bytes = fs::read(&args.input).map_err(|e| io_error(&args.input, e))?;
    let rows =
        if bytes.iter().all(u8::is_ascii_whitespace) { Vec::new() } else { corpus::parse_unlabeled_tsv(&bytes, &schema)? };
    let pipeline = Pipeline32::load(resolve_checkpoint(&args.checkpoint)?)?;
    let texts: Vec<&str> = rows.iter().map(|t| t.text.as_str()).collect();
    let scores = pipeline.scores(&texts)?;
    let labels = Pipeline32::labels(&scores);
    let mut out = String::from("id\tprobability\tlabel\n");
    for ((t, p), l) in rows.iter().zip(&scores).zip(&labels) {
        out.push_str(&format!("{}\t{p:.6}\t{l}\n", t.id));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_text(&args.out, &out)
}

#[derive(Serialize)]
struct DistributionRow {
    dataset: String,
    #[serde(flatten)]
    counts: Distribution,
    total: usize,
}

pub fn distribution(args: &DistributionArgs) -> Result<()> {
    let schema = Schema::default();
    let mut rows = Vec::new();
    for path in &args.inputs {
        let data = corpus::load_tsv(path, &schema)?;
        let counts = class_distribution(&data);
        let dataset = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push(DistributionRow { dataset, total: counts.total(), counts });
    }
    let w = rows.iter().map(|r| r.dataset.len()).max().unwrap_or(0).max("Dataset".len());
    println!("{:<w$} | {:>7} | {:>7} | {:>7}", "Dataset", "NOT", "OFF", "Total");
    println!("{}", "-".repeat(w + 30));
    for r in &rows {
        println!("{:<w$} | {:>7} | {:>7} | {:>7}", r.dataset, r.counts.not, r.counts.off, r.total);
    }
    if let Some(out) = &args.out {
        write_json(out, &rows)?;
    }
    Ok(())
}
