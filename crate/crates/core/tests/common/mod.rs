//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use bertcnn::corpus::Label;
use bertcnn::params::{Gradients, ParamStore};
use bertcnn::preprocess::{Vocabulary, CONTINUATION, UNK};
use bertcnn::tensor::Tensor;

// ---------------------------------------------------------------- metrics

/// Macro-F1 by explicit per-class counting.
pub fn macro_f1_oracle(preds: &[u8], golds: &[u8]) -> f64 {
    let mut total = 0.0;
    for class in [0u8, 1u8] {
        let predicted = preds.iter().filter(|&&p| p == class).count() as f64;
        let actual = golds.iter().filter(|&&g| g == class).count() as f64;
        let hits = preds.iter().zip(golds).filter(|(&p, &g)| p == class && g == class).count() as f64;
        let precision = if predicted == 0.0 { 0.0 } else { hits / predicted };
        let recall = if actual == 0.0 { 0.0 } else { hits / actual };
        total += if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    }
    total / 2.0
}

pub fn labels(bits: &[u8]) -> Vec<Label> {
    bits.iter().map(|&b| Label::from_bit(b == 1)).collect()
}

// ---------------------------------------------------------------- wordpiece

/// Longest-prefix-first matching without backtracking, by linear scan of
/// the vocabulary.
pub fn wordpiece_oracle(word: &str, vocab: &[String], max_chars: usize) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > max_chars {
        return vec![UNK.to_string()];
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut best: Option<(usize, String)> = None;
        for entry in vocab {
            let piece = if start == 0 {
                entry.as_str()
            } else {
                match entry.strip_prefix(CONTINUATION) {
                    Some(rest) => rest,
                    None => continue,
                }
            };
            let pc: Vec<char> = piece.chars().collect();
            if pc.is_empty() || start + pc.len() > chars.len() || chars[start..start + pc.len()] != pc[..] {
                continue;
            }
            if best.as_ref().map_or(true, |(n, _)| pc.len() > *n) {
                best = Some((pc.len(), entry.clone()));
            }
        }
        match best {
            Some((n, tok)) => {
                out.push(tok);
                start += n;
            }
            None => return vec![UNK.to_string()],
        }
    }
    out
}

/// Every way to write `word` as a concatenation of vocabulary pieces.
pub fn all_segmentations(word: &str, vocab: &Vocabulary) -> Vec<Vec<String>> {
    fn go(rest: &str, first: bool, vocab: &Vocabulary, acc: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if rest.is_empty() {
            out.push(acc.clone());
            return;
        }
        for (i, _) in rest.char_indices().skip(1).chain(std::iter::once((rest.len(), ' '))) {
            let piece = &rest[..i];
            let tok = if first { piece.to_string() } else { format!("{CONTINUATION}{piece}") };
            if vocab.contains(&tok) {
                acc.push(tok);
                go(&rest[i..], false, vocab, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(word, true, vocab, &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------- conv head

/// Nested-loop valid convolution, ReLU, global max, dense and sigmoid over
/// `input[c][l][h]`, reading parameters by name from `store`.
pub fn conv_head_oracle(
    input: &[Vec<Vec<f64>>],
    store: &ParamStore<f64>,
    prefix: &str,
    widths: &[usize],
    filters: usize,
) -> f64 {
    let c_n = input.len();
    let l_n = input[0].len();
    let h_n = input[0][0].len();
    let get = |name: &str| store.get(store.id(name).unwrap_or_else(|| panic!("missing {name}"))).data().to_vec();
    let mut pooled = Vec::new();
    for &w in widths {
        let k = get(&format!("{prefix}.conv.w{w}.kernel"));
        let b = get(&format!("{prefix}.conv.w{w}.bias"));
        for f in 0..filters {
            let mut best = f64::NEG_INFINITY;
            for p in 0..=(l_n - w) {
                let mut s = b[f];
                for c in 0..c_n {
                    for dw in 0..w {
                        for h in 0..h_n {
                            let ki = ((f * c_n + c) * w + dw) * h_n + h;
                            s += k[ki] * input[c][p + dw][h];
                        }
                    }
                }
                best = best.max(s.max(0.0));
            }
            pooled.push(best);
        }
    }
    let dw = get(&format!("{prefix}.dense.weight"));
    let db = get(&format!("{prefix}.dense.bias"));
    let z: f64 = pooled.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>() + db[0];
    1.0 / (1.0 + (-z).exp())
}

pub fn to_nested(t: &Tensor<f64>) -> Vec<Vec<Vec<f64>>> {
    let s = t.shape();
    let (c, l, h) = (s[0], s[1], s[2]);
    (0..c)
        .map(|ci| (0..l).map(|li| t.data()[(ci * l + li) * h..(ci * l + li + 1) * h].to_vec()).collect())
        .collect()
}

// ---------------------------------------------------------------- gradients

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-3;
/// Denominator floor for the relative error, so that gradients that are
/// zero up to rounding compare by absolute difference.
pub const FD_FLOOR: f64 = 1e-6;

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub worst: f64,
    pub worst_param: String,
}

/// Compares analytic gradients with central differences on every element
/// of every parameter.
pub fn gradient_check(
    store: &mut ParamStore<f64>,
    mut loss: impl FnMut(&ParamStore<f64>) -> (f64, Gradients<f64>),
) -> GradReport {
    let (_, grads) = loss(store);
    let mut report = GradReport::default();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).len();
        let analytic: Vec<f64> = grads.get(id).map_or(vec![0.0; n], |g| g.data().to_vec());
        for j in 0..n {
            let orig = store.get(id).data()[j];
            store.get_mut(id).data_mut()[j] = orig + FD_STEP;
            let plus = loss(store).0;
            store.get_mut(id).data_mut()[j] = orig - FD_STEP;
            let minus = loss(store).0;
            store.get_mut(id).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            report.checked += 1;
            if rel > report.worst {
                report.worst = rel;
                report.worst_param = format!("{}[{j}] analytic {a:e} numeric {numeric:e}", store.name(id));
            }
        }
    }
    report
}

// ---------------------------------------------------------------- svm

/// Exact dual solve of the bias-augmented linear SVM by accelerated
/// projected gradient on the box-constrained QP
/// `min ½ αᵀQα − 1ᵀα, 0 ≤ α ≤ C/N`, `Q_ij = y_i y_j (x_i·x_j + 1)`.
pub fn svm_qp_oracle(x: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = x.len();
    let upper = c / n as f64;
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| y[i] * y[j] * (x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>() + 1.0))
                .collect()
        })
        .collect();
    // Step 1/L with L bounded by the max absolute row sum.
    let lipschitz = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| q[i].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - 1.0).collect();
        let next: Vec<f64> = (0..n).map(|i| (z[i] - step * grad[i]).clamp(0.0, upper)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - alpha[i])).collect();
        alpha = next;
        t = t_next;
    }
    let dim = x[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for i in 0..n {
        for d in 0..dim {
            w[d] += alpha[i] * y[i] * x[i][d];
        }
        b += alpha[i] * y[i];
    }
    (w, b)
}

/// Two Gaussian blobs with a fraction of flipped labels.
pub fn noisy_blobs(n: usize, noise: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i % 2 == 0;
        let centre = if pos { [1.2, 1.0] } else { [-1.2, -1.0] };
        xs.push(vec![centre[0] + normal.sample(&mut rng), centre[1] + normal.sample(&mut rng)]);
        let flip = rng.gen::<f64>() < noise;
        ys.push(Label::from_bit(pos != flip));
    }
    (xs, ys)
}

// ---------------------------------------------------------------- data

pub const OFFENSIVE_WORDS: [&str; 5] = ["idiot", "stupid", "troll", "loser", "moron"];
pub const NEUTRAL_WORDS: [&str; 5] = ["lovely", "sunny", "friends", "tea", "garden"];

/// Tweets that are separable by vocabulary: offensive ones use only words
/// from one list, the rest only from the other.
pub fn separable_tweets(n: usize, seed: u64) -> Vec<bertcnn::LabeledTweet> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let off = i % 2 == 0;
            let words = if off { &OFFENSIVE_WORDS } else { &NEUTRAL_WORDS };
            let len = rng.gen_range(2..6);
            let text: Vec<&str> = (0..len).map(|_| words[rng.gen_range(0..words.len())]).collect();
            bertcnn::LabeledTweet { id: format!("s{i}"), text: text.join(" "), label: Label::from_bit(off) }
        })
        .collect()
}

// ---------------------------------------------------------------- models

pub fn example(ids: &[u32], len: usize, label: Option<Label>) -> bertcnn::TokenizedExample {
    let mut full = ids.to_vec();
    full.resize(len, 0);
    bertcnn::TokenizedExample { ids: full, mask: (0..len).map(|i| i < ids.len()).collect(), label }
}

/// Encoder small enough for exhaustive finite differences.
pub fn micro_encoder(vocab_size: usize) -> bertcnn::EncoderConfig {
    bertcnn::EncoderConfig {
        vocab_size,
        hidden: 8,
        layers: 4,
        heads: 2,
        max_position: 8,
        intermediate: 12,
        type_vocab_size: 2,
        layer_norm_eps: 1e-12,
    }
}

pub fn micro_head(in_channels: usize, embed_dim: usize) -> bertcnn::HeadConfig {
    bertcnn::HeadConfig { filter_widths: vec![1, 2, 3], filters_per_width: 2, in_channels, embed_dim, dropout: 0.0 }
}

/// One config of each neural variant, sized for tests.
pub fn micro_configs(vocab_size: usize) -> Vec<bertcnn::NeuralConfig> {
    use bertcnn::baselines::{BiLstmConfig, CnnTextConfig};
    use bertcnn::NeuralConfig;
    let enc = micro_encoder(vocab_size);
    let mut cnn = CnnTextConfig::new(vocab_size);
    cnn.embed_dim = 6;
    cnn.filter_widths = vec![1, 2, 3];
    cnn.filters_per_width = 2;
    let mut lstm = BiLstmConfig::new(vocab_size);
    lstm.embed_dim = 4;
    lstm.hidden = 3;
    lstm.layers = 1;
    vec![
        NeuralConfig::BertCnn { encoder: enc.clone(), head: micro_head(4, enc.hidden) },
        NeuralConfig::Bert { encoder: enc, dropout: 0.0 },
        NeuralConfig::CnnText(cnn),
        NeuralConfig::Bilstm(lstm),
    ]
}

/// Redraws every encoder matrix and embedding table (LayerNorm excluded)
/// from N(0, std). At the default 0.02 scale the embedding LayerNorm
/// amplifies a finite-difference step about fiftyfold, enough to swap
/// near-tied max-pool winners and cross a kink.
pub fn widen_encoder(model: &mut bertcnn::NeuralClassifier<f64>, std: f64, seed: u64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let store = model.store_mut();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let name = store.name(id).to_string();
        if name.starts_with("embeddings.") && name != "embeddings.weight" || name.starts_with("encoder.") {
            if !name.contains("LayerNorm") {
                let shape = store.get(id).shape().to_vec();
                *store.get_mut(id) = bertcnn::params::init::normal(&mut rng, &shape, std);
            }
        }
    }
}

/// Gradient check of the full BCE loss of `model` on `ex`.
pub fn model_gradient_check(model: &bertcnn::NeuralClassifier<f64>, ex: &bertcnn::TokenizedExample) -> GradReport {
    let target = if ex.label == Some(Label::Offensive) { 1.0 } else { 0.0 };
    let mut store = model.store().clone();
    gradient_check(&mut store, |s| {
        let mut g = bertcnn::graph::Graph::new(s);
        let z = model.logit(&mut g, ex, None).unwrap();
        let loss = g.bce_with_logits(z, target);
        (g.value(loss).data()[0], g.backward(loss).into_params())
    })
}

// ---------------------------------------------------------------- training

/// Vocabulary and preprocessor fitted to `data`.
pub fn preprocessor_for(data: &[bertcnn::LabeledTweet], max_len: usize) -> bertcnn::Preprocessor {
    use bertcnn::{Language, Preprocessor, Vocabulary};
    let bare = Preprocessor::new(Language::Turkish, Vocabulary::from_corpus(std::iter::empty(), 4), max_len);
    let words: Vec<String> = data.iter().flat_map(|t| bare.words(&t.text)).collect();
    let vocab = Vocabulary::from_corpus(words.iter().map(String::as_str), 1000);
    Preprocessor::new(Language::Turkish, vocab, max_len)
}

pub struct OverfitRun {
    pub history: bertcnn::RunHistory,
    pub train_macro_f1: f64,
    pub probabilities: Vec<f32>,
}

/// Tiny encoder + BERT-CNN head trained on 20 separable tweets, selected
/// and scored on the same 20.
pub fn overfit_run(seed: u64) -> OverfitRun {
    use bertcnn::training::{evaluate, probabilities, train};
    use bertcnn::{EncoderConfig, ModelKind, NeuralClassifier, NeuralConfig, TrainConfig};
    let data = separable_tweets(20, 1);
    let pre = preprocessor_for(&data, 12);
    let examples: Vec<_> = data.iter().map(|t| pre.example(&t.text, Some(t.label))).collect();
    let config = NeuralConfig::default_for(ModelKind::BertCnn, EncoderConfig::tiny(pre.vocab.len()), pre.vocab.len())
        .expect("bert_cnn is neural");
    let model = NeuralClassifier::<f32>::init(config, seed).unwrap();
    let cfg = TrainConfig { epochs: 30, learning_rate: 1e-3, batch_size: 8, seed, ..TrainConfig::default() };
    let (best, history) = train(model, &examples, &examples, &cfg, &mut |_, _, _| Ok(())).unwrap();
    OverfitRun {
        train_macro_f1: evaluate(&best, &examples).unwrap().macro_f1(),
        probabilities: probabilities(&best, &examples).unwrap(),
        history,
    }
}

// ---------------------------------------------------------------- random heads

pub const PREFIX: &str = "head";

/// Random config with H <= 8, L <= 10 and at most 3 distinct widths.
pub fn random_config(rng: &mut rand_chacha::ChaCha8Rng) -> (bertcnn::HeadConfig, usize) {
    use rand::{seq::SliceRandom, Rng};
    let seq_len = rng.gen_range(1..=10);
    let mut widths: Vec<usize> = (1..=seq_len.min(5)).collect();
    widths.shuffle(rng);
    widths.truncate(rng.gen_range(1..=widths.len().min(3)));
    let cfg = bertcnn::HeadConfig {
        filter_widths: widths,
        filters_per_width: rng.gen_range(1..=4),
        in_channels: rng.gen_range(1..=4),
        embed_dim: rng.gen_range(1..=8),
        dropout: 0.0,
    };
    (cfg, seq_len)
}

/// Seeded head with non-zero biases and a random `[C, L, H]` input.
pub fn random_head(seed: u64) -> (bertcnn::ConvHead, ParamStore<f64>, Tensor<f64>) {
    use bertcnn::params::init;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (cfg, seq_len) = random_config(&mut rng);
    let mut store = ParamStore::new();
    let head = bertcnn::ConvHead::init(&mut store, &cfg, PREFIX, &mut rng).unwrap();
    // Biases start at zero; redraw them so they take part in comparisons.
    for id in store.ids().collect::<Vec<_>>() {
        if store.name(id).ends_with("bias") {
            let n = store.get(id).len();
            *store.get_mut(id) = init::normal(&mut rng, &[n], 0.5);
        }
    }
    let input = init::normal(&mut rng, &[cfg.in_channels, seq_len, cfg.embed_dim], 1.0);
    (head, store, input)
}
