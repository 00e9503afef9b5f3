//! OffensEval-style TSV ingestion, stratified train/dev splitting and class
//! distributions.
//!
//! Files are UTF-8, tab-delimited, with one header row and no quoting. A tab
//! inside a field therefore shows up as an extra column and is rejected.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "NOT")]
    NotOffensive,
    #[serde(rename = "OFF")]
    Offensive,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::NotOffensive => "NOT",
            Label::Offensive => "OFF",
        }
    }

    /// 1 for Offensive, 0 for Not-offensive.
    pub fn as_bit(self) -> u8 {
        match self {
            Label::NotOffensive => 0,
            Label::Offensive => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Label::Offensive
        } else {
            Label::NotOffensive
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "OFF" => Ok(Label::Offensive),
            "NOT" => Ok(Label::NotOffensive),
            other => Err(format!("unknown label `{other}` (expected OFF or NOT)")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// Column names for the id, text and label fields.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub text: String,
    pub label: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self { id: "id".into(), text: "tweet".into(), label: "subtask_a".into() }
    }
}

struct Table<'a> {
    header: Vec<&'a str>,
    /// (1-based line number, fields)
    rows: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Table<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
        let header: Vec<&str> = match lines.next() {
            Some((_, h)) if !h.is_empty() => h.split('\t').collect(),
            _ => return Err(Error::Parse { row: 1, message: "missing header row".into() }),
        };
        let mut rows = Vec::new();
        for (line_no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != header.len() {
                return Err(Error::Parse {
                    row: line_no,
                    message: format!("expected {} tab-separated fields, found {}", header.len(), fields.len()),
                });
            }
            rows.push((line_no, fields));
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Schema { column: name.to_string() })
    }

    fn has_column(&self, name: &str) -> bool {
        self.header.contains(&name)
    }
}

fn decode(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::Decode { offset: e.valid_up_to() })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn tweet_fields<'a>(table: &Table<'a>, schema: &Schema) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let id_col = table.column(&schema.id)?;
    let text_col = table.column(&schema.text)?;
    table
        .rows
        .iter()
        .map(|(line, f)| {
            if f[text_col].trim().is_empty() {
                return Err(Error::Parse { row: *line, message: "empty tweet text".into() });
            }
            Ok((*line, f[id_col], f[text_col]))
        })
        .collect()
}

/// Parses labeled rows from TSV bytes.
pub fn parse_tsv(bytes: &[u8], schema: &Schema) -> Result<Vec<LabeledTweet>> {
    let table = Table::parse(decode(bytes)?)?;
    let label_col = table.column(&schema.label)?;
    let fields = tweet_fields(&table, schema)?;
    fields
        .into_iter()
        .zip(&table.rows)
        .map(|((line, id, text), (_, row))| {
            let label = row[label_col].trim().parse().map_err(|message| Error::Parse { row: line, message })?;
            Ok(LabeledTweet { id: id.to_string(), text: text.to_string(), label })
        })
        .collect()
}

/// Parses rows ignoring any label column (prediction input).
pub fn parse_unlabeled_tsv(bytes: &[u8], schema: &Schema) -> Result<Vec<Tweet>> {
    let table = Table::parse(decode(bytes)?)?;
    Ok(tweet_fields(&table, schema)?
        .into_iter()
        .map(|(_, id, text)| Tweet { id: id.to_string(), text: text.to_string() })
        .collect())
}

pub fn load_tsv(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<LabeledTweet>> {
    parse_tsv(&read(path.as_ref())?, schema)
}

pub fn load_unlabeled_tsv(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Tweet>> {
    parse_unlabeled_tsv(&read(path.as_ref())?, schema)
}

/// Whether the file's header carries the schema's label column.
pub fn has_label_column(path: impl AsRef<Path>, schema: &Schema) -> Result<bool> {
    let bytes = read(path.as_ref())?;
    let table = Table::parse(decode(&bytes)?)?;
    Ok(table.has_column(&schema.label))
}

fn check_field(row: usize, field: &str) -> Result<()> {
    if field.contains(['\t', '\n', '\r']) {
        return Err(Error::Parse { row, message: "field contains a tab or newline".into() });
    }
    Ok(())
}

pub fn to_tsv(records: &[LabeledTweet], schema: &Schema) -> Result<String> {
    let mut out = format!("{}\t{}\t{}\n", schema.id, schema.text, schema.label);
    for (i, r) in records.iter().enumerate() {
        check_field(i + 2, &r.id)?;
        check_field(i + 2, &r.text)?;
        out.push_str(&format!("{}\t{}\t{}\n", r.id, r.text, r.label));
    }
    Ok(out)
}

pub fn write_tsv(path: impl AsRef<Path>, records: &[LabeledTweet], schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_tsv(records, schema)?).map_err(|e| Error::io(path, e))
}

/// Per-class counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    #[serde(rename = "NOT")]
    pub not: usize,
    #[serde(rename = "OFF")]
    pub off: usize,
}

impl Distribution {
    pub fn total(&self) -> usize {
        self.not + self.off
    }

    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::NotOffensive => self.not,
            Label::Offensive => self.off,
        }
    }
}

pub fn class_distribution(data: &[LabeledTweet]) -> Distribution {
    data.iter().fold(Distribution::default(), |mut d, t| {
        match t.label {
            Label::NotOffensive => d.not += 1,
            Label::Offensive => d.off += 1,
        }
        d
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub train: Vec<LabeledTweet>,
    pub dev: Vec<LabeledTweet>,
    pub seed: u64,
    pub ratio: f64,
}

pub const DEFAULT_SPLIT_SEED: u64 = 42;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.9;

/// Number of training examples drawn from each class.
///
/// The overall training size is `round(ratio × N)`. Each class first gets
/// `floor(ratio × n_c)`; the few leftover slots go to the classes with the
/// largest fractional parts (ties to NOT). Every class therefore lands
/// within one example of its exact proportional share.
pub fn train_quotas(counts: &[usize], ratio: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let target = (ratio * n as f64).round() as usize;
    let mut quotas: Vec<usize> = counts.iter().map(|&c| (ratio * c as f64).floor() as usize).collect();
    let mut leftover = target.saturating_sub(quotas.iter().sum());
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let frac = |i: usize| ratio * counts[i] as f64 - quotas[i] as f64;
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for i in order {
        if leftover == 0 {
            break;
        }
        if quotas[i] < counts[i] {
            quotas[i] += 1;
            leftover -= 1;
        }
    }
    quotas
}

/// Stratified, seeded train/dev split. Both halves keep the input order.
pub fn split(data: &[LabeledTweet], ratio: f64, seed: u64) -> Result<DataSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    if data.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let classes = [Label::NotOffensive, Label::Offensive];
    let mut groups: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| data.iter().enumerate().filter(|(_, t)| t.label == c).map(|(i, _)| i).collect())
        .collect();
    for (c, g) in classes.iter().zip(&groups) {
        if g.len() < 2 {
            return Err(Error::Stratification(format!("class {c} has {} member(s); at least 2 required", g.len())));
        }
    }
    let quotas = train_quotas(&groups.iter().map(Vec::len).collect::<Vec<_>>(), ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; data.len()];
    for (g, &q) in groups.iter_mut().zip(&quotas) {
        g.shuffle(&mut rng);
        for &i in &g[..q] {
            in_train[i] = true;
        }
    }
    let (train, dev): (Vec<_>, Vec<_>) = data.iter().zip(&in_train).partition(|(_, &t)| t);
    Ok(DataSplit {
        train: train.into_iter().map(|(r, _)| r.clone()).collect(),
        dev: dev.into_iter().map(|(r, _)| r.clone()).collect(),
        seed,
        ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: Distribution,
    pub dev: Distribution,
}

/// JSON sidecar written next to the split TSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratio: f64,
    pub counts: SplitCounts,
}

impl DataSplit {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            ratio: self.ratio,
            counts: SplitCounts { train: class_distribution(&self.train), dev: class_distribution(&self.dev) },
        }
    }

    /// Writes `train.tsv`, `dev.tsv` and `split.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, schema: &Schema) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_tsv(dir.join("train.tsv"), &self.train, schema)?;
        write_tsv(dir.join("dev.tsv"), &self.dev, schema)?;
        let json = serde_json::to_string_pretty(&self.manifest())?;
        let path = dir.join("split.json");
        fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
    }
}
