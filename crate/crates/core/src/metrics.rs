//! Confusion counts and macro-averaged F1 for the binary OFF/NOT task.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// 2×2 confusion counts with `Offensive` as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts with the class convention swapped.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }

    pub fn positive(&self) -> ClassScores {
        ClassScores::from_counts(self.tp, self.fp, self.fn_)
    }

    pub fn negative(&self) -> ClassScores {
        ClassScores::from_counts(self.tn, self.fn_, self.fp)
    }

    pub fn macro_f1(&self) -> f64 {
        (self.positive().f1 + self.negative().f1) / 2.0
    }

    pub fn accuracy(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.n() as f64
        }
    }
}

/// Builds confusion counts from parallel prediction and gold vectors.
pub fn confusion(preds: &[Label], golds: &[Label]) -> Result<Confusion> {
    if preds.len() != golds.len() {
        return Err(Error::Contract(format!(
            "prediction/gold length mismatch: {} vs {}",
            preds.len(),
            golds.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (Label::Offensive, Label::Offensive) => c.tp += 1,
            (Label::Offensive, Label::NotOffensive) => c.fp += 1,
            (Label::NotOffensive, Label::Offensive) => c.fn_ += 1,
            (Label::NotOffensive, Label::NotOffensive) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn macro_f1(counts: &Confusion) -> f64 {
    counts.macro_f1()
}

/// Precision/recall/F1 for one class. Empty denominators yield 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassScores {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub language: String,
    pub seed: u64,
    pub dataset: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub offensive: ClassScores,
    pub not_offensive: ClassScores,
    pub macro_f1: f64,
    pub n: usize,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn new(confusion: Confusion, metadata: RunMetadata) -> Self {
        Self {
            offensive: confusion.positive(),
            not_offensive: confusion.negative(),
            macro_f1: confusion.macro_f1(),
            n: confusion.n(),
            confusion,
            metadata,
        }
    }

    pub fn from_predictions(preds: &[Label], golds: &[Label], metadata: RunMetadata) -> Result<Self> {
        Ok(Self::new(confusion(preds, golds)?, metadata))
    }
}

/// Renders `(model, language, macro-F1)` rows as a model × language table
/// with an average column, three decimals per cell.
pub fn render_table(rows: &[(String, String, f64)]) -> String {
    let mut languages: Vec<&str> = Vec::new();
    let mut models: Vec<&str> = Vec::new();
    for (m, l, _) in rows {
        if !models.contains(&m.as_str()) {
            models.push(m);
        }
        if !languages.contains(&l.as_str()) {
            languages.push(l);
        }
    }
    let model_w = models.iter().map(|m| m.len()).max().unwrap_or(0).max("Model".len());
    let col_w = languages.iter().map(|l| l.len()).max().unwrap_or(0).max("Average".len());

    let mut out = String::new();
    let _ = write!(out, "{:<model_w$}", "Model");
    for l in &languages {
        let _ = write!(out, " | {l:>col_w$}");
    }
    let _ = writeln!(out, " | {:>col_w$}", "Average");
    let _ = writeln!(out, "{}", "-".repeat(model_w + (languages.len() + 1) * (col_w + 3)));
    for m in &models {
        let _ = write!(out, "{m:<model_w$}");
        let mut scores = Vec::new();
        for l in &languages {
            match rows.iter().find(|(rm, rl, _)| rm == m && rl == l) {
                Some((_, _, s)) => {
                    scores.push(*s);
                    let _ = write!(out, " | {s:>col_w$.3}");
                }
                None => {
                    let _ = write!(out, " | {:>col_w$}", "-");
                }
            }
        }
        let avg = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
        let _ = writeln!(out, " | {avg:>col_w$.3}");
    }
    out
}
