mod common;

use bertcnn::baselines::{
    dense_to_sparse, tfidf_featurize, to_dense, train_linear_svm, BiLstm, BiLstmConfig, Direction, SvmConfig,
    TermWeighting, TfidfModel, TfidfVectorizer,
};
use bertcnn::graph::{sigmoid, Graph};
use bertcnn::params::ParamStore;
use bertcnn::tensor::Tensor;
use bertcnn::{Label, Language, NeuralClassifier, NeuralConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{conv_head_oracle, example, micro_configs, noisy_blobs, separable_tweets, svm_qp_oracle};

fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
    raw.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
}

#[test]
fn tfidf_matches_hand_table() {
    let corpus = docs(&[&["a", "b", "a"], &["b", "c"], &["a", "c", "c", "d"]]);
    let (v, rows) = tfidf_featurize(&corpus, 10).unwrap();
    // Totals a:3 c:3 b:2 d:1, so a and c tie and sort lexicographically.
    assert_eq!(v.vocabulary, ["a", "c", "b", "d"]);
    let i2 = (4.0f64 / 3.0).ln() + 1.0;
    let i1 = 2.0f64.ln() + 1.0;
    let n3 = (5.0 * i2 * i2 + i1 * i1).sqrt();
    let expected = [
        [2.0 / 5f64.sqrt(), 0.0, 1.0 / 5f64.sqrt(), 0.0],
        [0.0, 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0],
        [i2 / n3, 2.0 * i2 / n3, 0.0, i1 / n3],
    ];
    for (row, want) in rows.iter().zip(&expected) {
        for (got, want) in to_dense(row, 4).iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
    assert_eq!(v.idf, [i2, i2, i2, i1]);
}

#[test]
fn tfidf_top_k_and_determinism() {
    let corpus = docs(&[&["a", "b", "a"], &["b", "c"], &["a", "c", "c", "d"]]);
    let (v, rows) = tfidf_featurize(&corpus, 2).unwrap();
    assert_eq!(v.vocabulary, ["a", "c"]);
    let (v2, rows2) = tfidf_featurize(&corpus, 2).unwrap();
    assert_eq!((v, rows), (v2, rows2));
    let counts = TfidfVectorizer::fit(&corpus, 10, TermWeighting::Counts).unwrap();
    assert_eq!(to_dense(&counts.transform(&corpus[2]), 4), [1.0, 2.0, 0.0, 1.0]);
}

#[test]
fn svm_fits_separable_fixture() {
    let data = separable_tweets(40, 7);
    let model = TfidfModel::fit(&data, Language::Turkish, 3000, TermWeighting::TfIdf, &SvmConfig::default()).unwrap();
    assert!(data.iter().all(|t| (model.decision(&t.text) >= 0.0) == (t.label == Label::Offensive)));
}

fn accuracy(pred: impl Fn(&[f64]) -> f64, xs: &[Vec<f64>], ys: &[Label]) -> f64 {
    let hits = xs.iter().zip(ys).filter(|(x, &y)| (pred(x) >= 0.0) == (y == Label::Offensive)).count();
    hits as f64 / xs.len() as f64
}

#[test]
fn svm_matches_exact_qp_on_noisy_blobs() {
    let (x, y) = noisy_blobs(200, 0.1, 3);
    let (tx, ty) = noisy_blobs(1000, 0.1, 4);
    let rows: Vec<_> = x.iter().map(|r| dense_to_sparse(r)).collect();
    let svm = train_linear_svm(&rows, &y, 2, &SvmConfig::default()).unwrap();
    let signs: Vec<f64> = y.iter().map(|&l| if l == Label::Offensive { 1.0 } else { -1.0 }).collect();
    let (w, b) = svm_qp_oracle(&x, &signs, 1.0, 20_000);
    let ours = accuracy(|p| svm.decision_dense(p), &tx, &ty);
    let exact = accuracy(|p| p.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b, &tx, &ty);
    assert!((ours - exact).abs() <= 0.05, "{ours} vs {exact}");
    assert!(exact > 0.75);
    for (a, c) in svm.weights.iter().zip(&w) {
        assert!((a - c).abs() < 1e-3, "{:?} vs {:?}", svm.weights, w);
    }
}

#[test]
fn svm_decision_is_duplication_invariant() {
    let (x, y) = noisy_blobs(60, 0.15, 9);
    let rows: Vec<_> = x.iter().map(|r| dense_to_sparse(r)).collect();
    let cfg = SvmConfig::default();
    let once = train_linear_svm(&rows, &y, 2, &cfg).unwrap();
    let twice_rows: Vec<_> = rows.iter().chain(&rows).cloned().collect();
    let twice_y: Vec<_> = y.iter().chain(&y).copied().collect();
    let twice = train_linear_svm(&twice_rows, &twice_y, 2, &cfg).unwrap();
    for r in &rows {
        assert!((once.decision(r) - twice.decision(r)).abs() < 1e-6);
    }
}

fn zeroed(config: NeuralConfig) -> NeuralClassifier<f64> {
    let mut m = NeuralClassifier::<f64>::init(config, 0).unwrap();
    let store = m.store_mut();
    for id in store.ids().collect::<Vec<_>>() {
        store.get_mut(id).data_mut().fill(0.0);
    }
    m
}

#[test]
fn zero_weights_give_one_half() {
    let ex = example(&[2, 5, 7, 3], 8, None);
    for cfg in micro_configs(12) {
        let kind = cfg.kind();
        assert_eq!(zeroed(cfg).probability(&ex).unwrap(), 0.5, "{kind}");
    }
}

#[test]
fn cnn_text_matches_convolution_oracle() {
    for seed in 0..20 {
        let cfg = micro_configs(12).remove(2);
        let NeuralConfig::CnnText(c) = &cfg else { unreachable!() };
        let c = c.clone();
        let model = NeuralClassifier::<f64>::init(cfg, seed).unwrap();
        let ex = example(&[2, (seed % 10) as u32 + 1, 7, 3], 6, None);
        let table = model.store().get(model.store().id("embeddings.weight").unwrap());
        let rows: Vec<Vec<f64>> = ex.ids.iter().map(|&i| table.row(i as usize).to_vec()).collect();
        let want = conv_head_oracle(&[rows], model.store(), "head", &c.filter_widths, c.filters_per_width);
        assert!((model.probability(&ex).unwrap() - want).abs() < 1e-10);
    }
}

fn set(store: &mut ParamStore<f64>, name: &str, values: &[f64]) {
    let id = store.id(name).unwrap_or_else(|| panic!("missing {name}"));
    let shape = store.get(id).shape().to_vec();
    *store.get_mut(id) = Tensor::from_vec(&shape, values.to_vec());
}

fn scalar_lstm() -> (BiLstm, ParamStore<f64>) {
    let mut cfg = BiLstmConfig::new(4);
    cfg.embed_dim = 1;
    cfg.hidden = 1;
    cfg.layers = 1;
    let mut store = ParamStore::new();
    let m = BiLstm::init(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    set(&mut store, "embeddings.weight", &[0.0, 0.7, -0.4, 1.3]);
    (m, store)
}

#[test]
fn bilstm_saturated_cell_by_hand() {
    let (m, mut store) = scalar_lstm();
    for dir in ["fwd", "bwd"] {
        // Input and output gates open, forget gate shut.
        set(&mut store, &format!("lstm.l0.{dir}.w_ih"), &[0.0, 0.0, 1.0, 0.0]);
        set(&mut store, &format!("lstm.l0.{dir}.w_hh"), &[0.0; 4]);
        set(&mut store, &format!("lstm.l0.{dir}.bias"), &[50.0, -50.0, 0.0, 50.0]);
    }
    set(&mut store, "classifier.weight", &[1.0, -2.0]);
    set(&mut store, "classifier.bias", &[0.25]);
    let ex = example(&[1], 1, None);
    let mut g = Graph::new(&store);
    let (f, b) = m.final_states(&mut g, &ex, None).unwrap();
    let h = 0.7f64.tanh().tanh();
    assert!((g.value(f).data()[0] - h).abs() < 1e-15);
    assert!((g.value(b).data()[0] - h).abs() < 1e-15);
    let z = m.logit(&mut g, &ex, None).unwrap();
    assert!((g.value(z).data()[0] - (h - 2.0 * h + 0.25)).abs() < 1e-15);
}

/// Scalar LSTM recurrence with gate order input, forget, candidate, output.
fn reference_run(xs: &[f64], w_ih: &[f64], w_hh: &[f64], bias: &[f64]) -> f64 {
    let (mut h, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let pre: Vec<f64> = (0..4).map(|k| w_ih[k] * x + w_hh[k] * h + bias[k]).collect();
        let (i, f, cand, o) = (sigmoid(pre[0]), sigmoid(pre[1]), pre[2].tanh(), sigmoid(pre[3]));
        c = f * c + i * cand;
        h = o * c.tanh();
    }
    h
}

#[test]
fn bilstm_matches_scalar_recurrence() {
    let (m, store) = scalar_lstm();
    let get = |n: &str| store.get(store.id(n).unwrap()).data().to_vec();
    let table = get("embeddings.weight");
    let ids = [3u32, 1, 2, 2, 1];
    let xs: Vec<f64> = ids.iter().map(|&i| table[i as usize]).collect();
    let rev: Vec<f64> = xs.iter().rev().copied().collect();
    let want_f = reference_run(&xs, &get("lstm.l0.fwd.w_ih"), &get("lstm.l0.fwd.w_hh"), &get("lstm.l0.fwd.bias"));
    let want_b = reference_run(&rev, &get("lstm.l0.bwd.w_ih"), &get("lstm.l0.bwd.w_hh"), &get("lstm.l0.bwd.bias"));
    // Two padding slots must not reach either direction.
    let ex = example(&ids, 7, None);
    let mut g = Graph::new(&store);
    let (f, b) = m.final_states(&mut g, &ex, None).unwrap();
    assert!((g.value(f).data()[0] - want_f).abs() < 1e-12);
    assert!((g.value(b).data()[0] - want_b).abs() < 1e-12);
}

#[test]
fn bilstm_tied_directions_swap_under_reversal() {
    let NeuralConfig::Bilstm(cfg) = micro_configs(12).remove(3) else { unreachable!() };
    let mut store = ParamStore::<f64>::new();
    let m = BiLstm::init(&mut store, &cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    for part in ["w_ih", "w_hh", "bias"] {
        let fwd = store.get(store.id(&format!("lstm.l0.fwd.{part}")).unwrap()).clone();
        *store.get_mut(store.id(&format!("lstm.l0.bwd.{part}")).unwrap()) = fwd;
    }
    let ids = [2u32, 9, 4, 7, 1];
    let rev: Vec<u32> = ids.iter().rev().copied().collect();
    let mut g = Graph::new(&store);
    let (f1, b1) = m.final_states(&mut g, &example(&ids, 5, None), None).unwrap();
    let (f2, b2) = m.final_states(&mut g, &example(&rev, 5, None), None).unwrap();
    assert!(g.value(f1).max_abs_diff(g.value(b2)) < 1e-14);
    assert!(g.value(b1).max_abs_diff(g.value(f2)) < 1e-14);
    assert_eq!(m.cell(0, Direction::Forward).w_ih, store.id("lstm.l0.fwd.w_ih").unwrap());
}
