//! Linear SVM trained by dual coordinate descent.
//!
//! Objective: `½(‖w‖² + b²) + (C / N) Σ max(0, 1 − yᵢ(w·xᵢ + b))`. The bias is
//! handled as an extra constant feature, so it is regularized with `w`.
//! Scaling the hinge sum by `1 / N` makes the optimum invariant to
//! duplicating the training set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// Stop when the projected-gradient spread falls below this.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, tolerance: 1e-6, max_epochs: 2000, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &SparseVec) -> f64 {
        x.iter().map(|&(j, v)| self.weights.get(j as usize).copied().unwrap_or(0.0) * v).sum::<f64>() + self.bias
    }

    pub fn decision_dense(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    /// Offensive iff the decision value is non-negative.
    pub fn predict(&self, x: &SparseVec) -> Label {
        Label::from_bit(self.decision(x) >= 0.0)
    }
}

pub fn dense_to_sparse(x: &[f64]) -> SparseVec {
    x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j as u32, v)).collect()
}

pub fn train_linear_svm(features: &[SparseVec], labels: &[Label], dim: usize, config: &SvmConfig) -> Result<LinearSvm> {
    if features.len() != labels.len() {
        return Err(Error::Contract(format!("{} feature rows but {} labels", features.len(), labels.len())));
    }
    if !(config.c > 0.0) {
        return Err(Error::Config(format!("SVM C must be positive, got {}", config.c)));
    }
    let pos = labels.iter().filter(|l| **l == Label::Offensive).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Training("SVM training needs examples of both classes".into()));
    }
    if let Some(&(j, _)) = features.iter().flatten().find(|(j, _)| *j as usize >= dim) {
        return Err(Error::Contract(format!("feature index {j} outside dimension {dim}")));
    }

    let n = features.len();
    let upper = config.c / n as f64;
    let y: Vec<f64> = labels.iter().map(|l| if *l == Label::Offensive { 1.0 } else { -1.0 }).collect();
    let q: Vec<f64> = features.iter().map(|x| x.iter().map(|(_, v)| v * v).sum::<f64>() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let x = &features[i];
            let margin = x.iter().map(|&(j, v)| w[j as usize] * v).sum::<f64>() + b;
            let grad = y[i] * margin - 1.0;
            let pg = if alpha[i] <= 0.0 {
                grad.min(0.0)
            } else if alpha[i] >= upper {
                grad.max(0.0)
            } else {
                grad
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - grad / q[i]).clamp(0.0, upper);
                let delta = (alpha[i] - old) * y[i];
                for &(j, v) in x {
                    w[j as usize] += delta * v;
                }
                b += delta;
            }
        }
        if pg_max - pg_min < config.tolerance {
            break;
        }
    }
    if !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Err(Error::numeric("SVM weights"));
    }
    Ok(LinearSvm { weights: w, bias: b, c: config.c })
}
