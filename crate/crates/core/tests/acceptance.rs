//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion over all of them.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use bertcnn::baselines::{dense_to_sparse, tfidf_featurize, to_dense, train_linear_svm, SvmConfig, TermWeighting, TfidfModel};
use bertcnn::graph::Graph;
use bertcnn::head::parameter_count;
use bertcnn::metrics::{confusion, macro_f1, Confusion};
use bertcnn::params::ParamStore;
use bertcnn::preprocess::{encode, normalize, segment_hashtags, normalize_greek, wordpiece_word, Vocabulary, MAX_WORD_CHARS};
use bertcnn::{ConvHead, EmbeddingStack, HeadConfig, Label, Language, NeuralClassifier, Pipeline, Pipeline32};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parameter_count_identity() -> Outcome {
    let cfg = HeadConfig::bert_cnn(768);
    let mut store = ParamStore::<f32>::new();
    ConvHead::init(&mut store, &cfg, PREFIX, &mut ChaCha8Rng::seed_from_u64(0)).map_err(|e| e.to_string())?;
    let enumerated: usize = store.iter().map(|(_, _, t)| t.len()).sum();
    ensure(enumerated == 1_474_881 && parameter_count(&cfg) == enumerated, || {
        format!("enumerated {enumerated}, closed form {}", parameter_count(&cfg))
    })?;
    Ok(format!("{enumerated} parameters"))
}

fn convolution_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let (head, store, input) = random_head(seed);
        let cfg = head.config();
        let stack = EmbeddingStack { mask: vec![true; input.shape()[1]], values: input.clone() };
        let got = head.forward(&store, &stack).map_err(|e| e.to_string())?;
        let want = conv_head_oracle(&to_nested(&input), &store, PREFIX, &cfg.filter_widths, cfg.filters_per_width);
        worst = worst.max((got - want).abs());
    }
    ensure(worst < 1e-5, || format!("max deviation {worst:e}"))?;
    Ok(format!("100 configs, max deviation {worst:.1e}"))
}

fn gradient_checks() -> Outcome {
    let mut lines = Vec::new();
    let (head, mut store, input) = random_head(77);
    let r = gradient_check(&mut store, |s| {
        let mut g = Graph::new(s);
        let x = g.constant(input.clone());
        let z = head.logit(&mut g, x, None).unwrap();
        let loss = g.bce_with_logits(z, 1.0);
        (g.value(loss).data()[0], g.backward(loss).into_params())
    });
    lines.push(("head".to_string(), r));
    let ex = example(&[2, 5, 7, 9, 3], 8, Some(Label::Offensive));
    for (i, config) in micro_configs(12).into_iter().enumerate() {
        let kind = config.kind();
        let mut model = NeuralClassifier::<f64>::init(config, i as u64).map_err(|e| e.to_string())?;
        if model.encoder().is_some() {
            widen_encoder(&mut model, 0.5, i as u64);
        }
        lines.push((kind.to_string(), model_gradient_check(&model, &ex)));
    }
    let bad: Vec<String> = lines
        .iter()
        .filter(|(_, r)| r.worst >= FD_TOLERANCE)
        .map(|(k, r)| format!("{k}: {} rel {:e}", r.worst_param, r.worst))
        .collect();
    ensure(bad.is_empty(), || bad.join("; "))?;
    let total: usize = lines.iter().map(|(_, r)| r.checked).sum();
    let worst = lines.iter().map(|(_, r)| r.worst).fold(0.0, f64::max);
    Ok(format!("{total} parameters over {} models, worst rel {worst:.1e}", lines.len()))
}

fn macro_f1_oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let p: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let g: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let c = confusion(&labels(&p), &labels(&g)).map_err(|e| e.to_string())?;
        worst = worst.max((macro_f1(&c) - macro_f1_oracle(&p, &g)).abs());
    }
    ensure(worst <= 1e-12, || format!("oracle deviation {worst:e}"))?;
    let hand = macro_f1(&Confusion { tp: 3, fp: 1, fn_: 1, tn: 5 });
    ensure((hand - 0.79167).abs() < 5e-6, || format!("hand case {hand}"))?;
    let greek = macro_f1(&Confusion { tp: 0, fp: 0, fn_: 424, tn: 1120 });
    ensure((greek - 0.4204).abs() < 5e-5, || format!("all-negative case {greek}"))?;
    Ok(format!("1000 vectors, hand {hand:.5}, all-negative {greek:.4}"))
}

fn overfit_smoke() -> Outcome {
    let run = overfit_run(42);
    ensure(run.train_macro_f1 >= 0.95, || format!("train macro-F1 {}", run.train_macro_f1))?;
    let again = overfit_run(42);
    ensure(again.history.losses() == run.history.losses(), || "rerun changed the loss history".into())?;
    Ok(format!("train macro-F1 {:.3} after 30 epochs", run.train_macro_f1))
}

const GOLDEN: &str = include_str!("fixtures/preprocess_golden.tsv");

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[char] = &[
        '#', '_', ' ', 'a', 'B', 'c', 'D', 'z', '0', '7', 'ü', 'İ', 'ı', 'ş', 'Ά', 'ά', 'Σ', 'σ', 'ς', 'ΐ', 'ك', '!', '.',
        '\u{301}', '\u{308}',
    ];
    let n = rng.gen_range(0..30);
    (0..n).map(|_| if rng.gen_bool(0.1) { rng.gen::<char>() } else { *POOL.choose(rng).unwrap() }).collect()
}

fn preprocessing_golden() -> Outcome {
    ensure(segment_hashtags("#SomeHashtagText") == "Some Hashtag Text", || "hashtag example".into())?;
    let mut cases = 0;
    for line in GOLDEN.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let lang: Language = f[0].parse().map_err(|e| format!("{e:?}"))?;
        let got = normalize(f[1], lang);
        ensure(got == f[2], || format!("{:?} gave {got:?}, expected {:?}", f[1], f[2]))?;
        cases += 1;
    }
    ensure(cases >= 20, || format!("only {cases} fixture cases"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let s = random_text(&mut rng);
        let h = segment_hashtags(&s);
        ensure(segment_hashtags(&h) == h, || format!("hashtag pass not idempotent on {s:?}"))?;
        let g = normalize_greek(&s);
        ensure(normalize_greek(&g) == g, || format!("greek pass not idempotent on {s:?}"))?;
    }
    Ok(format!("{cases} fixture cases, 1000 idempotence strings"))
}

fn wordpiece_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let letters = ['a', 'b', 'c'];
    let piece = |rng: &mut ChaCha8Rng| -> String { (0..rng.gen_range(1..=4)).map(|_| *letters.choose(rng).unwrap()).collect() };
    for _ in 0..500 {
        let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].iter().map(|s| s.to_string()).collect();
        for _ in 0..rng.gen_range(1..40) {
            let p = piece(&mut rng);
            tokens.push(if rng.gen_bool(0.5) { format!("##{p}") } else { p });
        }
        tokens.sort();
        tokens.dedup();
        let vocab = Vocabulary::from_tokens(tokens).map_err(|e| e.to_string())?;
        let word: String = (0..rng.gen_range(1..=12)).map(|_| *letters.choose(&mut rng).unwrap()).collect();
        let got = wordpiece_word(&word, &vocab);
        let want = wordpiece_oracle(&word, vocab.tokens(), MAX_WORD_CHARS);
        ensure(got == want, || format!("{word}: {got:?} vs {want:?}"))?;
        let max_len = rng.gen_range(3..64);
        let ex = encode(&got, &vocab, max_len, None);
        ensure(ex.is_well_formed(&vocab, max_len), || format!("malformed encoding of {word}"))?;
    }
    Ok("500 fuzzed pairs".into())
}

fn determinism() -> Outcome {
    let (a, b) = (overfit_run(9), overfit_run(9));
    let worst = a.history.losses().iter().zip(b.history.losses()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-6, || format!("loss histories differ by {worst:e}"))?;
    let dev = |r: &OverfitRun| r.history.epochs.iter().map(|e| e.dev_macro_f1).collect::<Vec<_>>();
    ensure(dev(&a) == dev(&b), || "dev scores differ".into())?;
    Ok(format!("{} epochs, max loss difference {worst:.1e}", a.history.epochs.len()))
}

fn baseline_sanity() -> Outcome {
    let data = separable_tweets(40, 7);
    let model = TfidfModel::fit(&data, Language::Turkish, 3000, TermWeighting::TfIdf, &SvmConfig::default())
        .map_err(|e| e.to_string())?;
    let acc = Pipeline32::svm(model).evaluate(&data).map_err(|e| e.to_string())?.accuracy();
    ensure(acc == 1.0, || format!("separable accuracy {acc}"))?;

    let (x, y) = noisy_blobs(200, 0.1, 3);
    let (tx, ty) = noisy_blobs(1000, 0.1, 4);
    let rows: Vec<_> = x.iter().map(|r| dense_to_sparse(r)).collect();
    let svm = train_linear_svm(&rows, &y, 2, &SvmConfig::default()).map_err(|e| e.to_string())?;
    let signs: Vec<f64> = y.iter().map(|&l| if l == Label::Offensive { 1.0 } else { -1.0 }).collect();
    let (w, b) = svm_qp_oracle(&x, &signs, 1.0, 20_000);
    let accuracy = |f: &dyn Fn(&[f64]) -> f64| {
        tx.iter().zip(&ty).filter(|(p, &l)| (f(p) >= 0.0) == (l == Label::Offensive)).count() as f64 / tx.len() as f64
    };
    let ours = accuracy(&|p| svm.decision_dense(p));
    let exact = accuracy(&|p| p[0] * w[0] + p[1] * w[1] + b);
    ensure((ours - exact).abs() <= 0.05, || format!("svm {ours} vs exact {exact}"))?;

    let corpus: Vec<Vec<String>> = [&["a", "b", "a"][..], &["b", "c"], &["a", "c", "c", "d"]]
        .iter()
        .map(|d| d.iter().map(|s| s.to_string()).collect())
        .collect();
    let (_, tf) = tfidf_featurize(&corpus, 10).map_err(|e| e.to_string())?;
    let (i2, i1) = ((4.0f64 / 3.0).ln() + 1.0, 2.0f64.ln() + 1.0);
    let n3 = (5.0 * i2 * i2 + i1 * i1).sqrt();
    let (r5, r2) = (5f64.sqrt(), 2f64.sqrt());
    let table = [[2.0 / r5, 0.0, 1.0 / r5, 0.0], [0.0, 1.0 / r2, 1.0 / r2, 0.0], [i2 / n3, 2.0 * i2 / n3, 0.0, i1 / n3]];
    let worst = tf
        .iter()
        .zip(&table)
        .flat_map(|(row, want)| to_dense(row, 4).into_iter().zip(want.iter()).map(|(g, w)| (g - w).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    ensure(worst < 1e-9, || format!("tf-idf deviation {worst:e}"))?;
    Ok(format!("separable {acc:.2}, blobs {ours:.3} vs exact {exact:.3}, tf-idf {worst:.1e}"))
}

fn checkpoint_round_trip() -> Outcome {
    let data = separable_tweets(16, 3);
    let pre = preprocessor_for(&data, 8);
    let texts: Vec<&str> = data.iter().map(|t| t.text.as_str()).collect();
    let mut pipelines: Vec<Pipeline32> = Vec::new();
    for (i, cfg) in micro_configs(pre.vocab.len()).into_iter().enumerate() {
        let model = NeuralClassifier::init(cfg, i as u64).map_err(|e| e.to_string())?;
        pipelines.push(Pipeline::neural(pre.clone(), model).map_err(|e| e.to_string())?);
    }
    let svm = TfidfModel::fit(&data, Language::Turkish, 100, TermWeighting::TfIdf, &SvmConfig::default())
        .map_err(|e| e.to_string())?;
    pipelines.push(Pipeline::svm(svm));
    let mut worst = 0.0f64;
    for p in &pipelines {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        p.save(dir.path()).map_err(|e| e.to_string())?;
        let back = Pipeline32::load(dir.path()).map_err(|e| e.to_string())?;
        let (a, b) = (p.scores(&texts).map_err(|e| e.to_string())?, back.scores(&texts).map_err(|e| e.to_string())?);
        worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        let (fa, fb) = (p.evaluate(&data).unwrap().macro_f1(), back.evaluate(&data).unwrap().macro_f1());
        ensure(fa == fb, || format!("{}: dev macro-F1 {fa} became {fb}", p.kind()))?;
    }
    ensure(worst <= 1e-7, || format!("forward outputs differ by {worst:e}"))?;
    Ok(format!("{} variants, max output difference {worst:.1e}", pipelines.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("parameter-count identity", parameter_count_identity),
        ("convolution oracle", convolution_oracle),
        ("gradient checks", gradient_checks),
        ("macro-F1 oracle", macro_f1_oracle_agreement),
        ("overfit smoke test", overfit_smoke),
        ("preprocessing golden file", preprocessing_golden),
        ("wordpiece conformance", wordpiece_conformance),
        ("determinism", determinism),
        ("baseline sanity", baseline_sanity),
        ("checkpoint round-trip", checkpoint_round_trip),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                println!("criterion {:>2}: FAIL  {name} ({why}; {secs:.1}s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
