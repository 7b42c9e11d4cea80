//! End-to-end acceptance gates. Every test prints one `PASS …` line with the
//! measured quantities; a failed assertion is the corresponding FAIL line.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{synth_corpus, GenConfig};
use ovaner_core::corpus::{
    binarize_labels, build_label_set, build_vocabulary, corpus_stats, load_conll, write_conll,
    Corpus, Sentence,
};
use ovaner_core::evaluation::{decode_spans, entity_f1, evaluate_model, token_auc};
use ovaner_core::experiment::{grid_sample, run_grid, write_summary, ExperimentSpec, TrainOverrides};
use ovaner_core::losses::{auc_margin_loss, bce_loss, ce_loss, dual_optima, HeadDualState, Method};
use ovaner_core::model::{
    backward_into, encode, head_score, init_model, multiclass_logits, save_model, EncoderDims,
    ModelGradients, ModelState, Upstream,
};
use ovaner_core::optimizer::{step_dual, OptimizerConfig};
use ovaner_core::sampling::{entity_token_pct, sample_imbalanced, SampleSpec};
use ovaner_core::training::{train, TrainConfig};

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1.0, f64::max(analytic.abs(), numeric.abs()))
}

// ---------------------------------------------------------------- gradients

/// Address of one scalar parameter inside a [`ModelState`].
#[derive(Clone, Copy)]
enum Slot {
    Word(usize, usize),
    Case(usize, usize),
    HidW(usize, usize),
    HidB(usize),
    HeadW(usize, usize),
    HeadB(usize),
    McW(usize, usize),
    McB(usize),
}

fn slots(state: &ModelState) -> Vec<Slot> {
    let mut out = Vec::new();
    let e = &state.encoder;
    for r in 0..e.word_emb.nrows() {
        for c in 0..e.word_emb.ncols() {
            out.push(Slot::Word(r, c));
        }
    }
    for r in 0..e.case_emb.nrows() {
        for c in 0..e.case_emb.ncols() {
            out.push(Slot::Case(r, c));
        }
    }
    for r in 0..e.hidden_w.nrows() {
        for c in 0..e.hidden_w.ncols() {
            out.push(Slot::HidW(r, c));
        }
    }
    for i in 0..e.hidden_b.len() {
        out.push(Slot::HidB(i));
    }
    for (k, head) in state.heads.iter().enumerate() {
        for i in 0..head.weight.len() {
            out.push(Slot::HeadW(k, i));
        }
        out.push(Slot::HeadB(k));
    }
    if let Some(mc) = &state.multiclass_head {
        for r in 0..mc.weight.nrows() {
            for c in 0..mc.weight.ncols() {
                out.push(Slot::McW(r, c));
            }
        }
        for i in 0..mc.bias.len() {
            out.push(Slot::McB(i));
        }
    }
    out
}

fn nudge(state: &mut ModelState, slot: Slot, delta: f64) {
    match slot {
        Slot::Word(r, c) => state.encoder.word_emb[[r, c]] += delta,
        Slot::Case(r, c) => state.encoder.case_emb[[r, c]] += delta,
        Slot::HidW(r, c) => state.encoder.hidden_w[[r, c]] += delta,
        Slot::HidB(i) => state.encoder.hidden_b[i] += delta,
        Slot::HeadW(k, i) => state.heads[k].weight[i] += delta,
        Slot::HeadB(k) => state.heads[k].bias += delta,
        Slot::McW(r, c) => state.multiclass_head.as_mut().unwrap().weight[[r, c]] += delta,
        Slot::McB(i) => state.multiclass_head.as_mut().unwrap().bias[i] += delta,
    }
}

fn analytic_grad(grads: &ModelGradients, slot: Slot) -> f64 {
    match slot {
        Slot::Word(r, c) => grads.word_emb[[r, c]],
        Slot::Case(r, c) => grads.case_emb[[r, c]],
        Slot::HidW(r, c) => grads.hidden_w[[r, c]],
        Slot::HidB(i) => grads.hidden_b[i],
        Slot::HeadW(k, i) => grads.heads[k].weight[i],
        Slot::HeadB(k) => grads.heads[k].bias,
        Slot::McW(r, c) => grads.multiclass_head.as_ref().unwrap().weight[[r, c]],
        Slot::McB(i) => grads.multiclass_head.as_ref().unwrap().bias[i],
    }
}

#[derive(Clone, Copy, PartialEq)]
enum LossKind {
    Auc,
    Bce,
    Ce,
}

fn objective(state: &ModelState, corpus: &Corpus, duals: &[HeadDualState], kind: LossKind) -> f64 {
    let ls = &state.label_set;
    let mut total = 0.0;
    for sentence in &corpus.sentences {
        let fwd = encode(state, sentence);
        if kind == LossKind::Ce {
            let logits = multiclass_logits(state, &fwd.features).unwrap();
            let gold: Vec<usize> = sentence
                .labels
                .iter()
                .map(|l| ls.index_of(l).unwrap())
                .collect();
            total += ce_loss(&logits, &gold).unwrap().0;
        } else {
            for k in 0..ls.len() {
                let scores = head_score(state, &fwd.features, k);
                let bins = binarize_labels(sentence, ls.label(k), ls).unwrap();
                total += match kind {
                    LossKind::Auc => auc_margin_loss(&scores, &bins, &duals[k]).unwrap().loss,
                    LossKind::Bce => bce_loss(&scores, &bins).unwrap().0,
                    LossKind::Ce => unreachable!(),
                };
            }
        }
    }
    total
}

fn model_gradients(
    state: &ModelState,
    corpus: &Corpus,
    duals: &[HeadDualState],
    kind: LossKind,
) -> ModelGradients {
    let ls = &state.label_set;
    let mut grads = ModelGradients::zeros_like(state);
    for sentence in &corpus.sentences {
        let fwd = encode(state, sentence);
        if kind == LossKind::Ce {
            let logits = multiclass_logits(state, &fwd.features).unwrap();
            let gold: Vec<usize> = sentence
                .labels
                .iter()
                .map(|l| ls.index_of(l).unwrap())
                .collect();
            let (_, d_logits) = ce_loss(&logits, &gold).unwrap();
            backward_into(state, &fwd, &Upstream::MulticlassLogits(&d_logits), &mut grads)
                .unwrap();
        } else {
            let mut per_head: Vec<(usize, Vec<f64>)> = Vec::new();
            for k in 0..ls.len() {
                let scores = head_score(state, &fwd.features, k);
                let bins = binarize_labels(sentence, ls.label(k), ls).unwrap();
                let d_scores = match kind {
                    LossKind::Auc => auc_margin_loss(&scores, &bins, &duals[k]).unwrap().d_scores,
                    LossKind::Bce => bce_loss(&scores, &bins).unwrap().1,
                    LossKind::Ce => unreachable!(),
                };
                per_head.push((k, d_scores));
            }
            backward_into(state, &fwd, &Upstream::HeadScores(&per_head), &mut grads).unwrap();
        }
    }
    grads
}

fn random_grad_corpus(rng: &mut ChaCha8Rng) -> Corpus {
    let words = [
        "alpha", "Beta", "GAMMA", "d3lta", "epsilon", "Zeta", "eta", "Theta",
    ];
    let tags = ["O", "O", "B-A", "B-B", "I-A"];
    let mut sentences = Vec::new();
    for _ in 0..2 {
        let len = rng.random_range(4..=7);
        let tokens: Vec<String> = (0..len)
            .map(|_| words.choose(rng).unwrap().to_string())
            .collect();
        let labels: Vec<String> = (0..len)
            .map(|_| tags.choose(rng).unwrap().to_string())
            .collect();
        sentences.push(Sentence::new(tokens, labels).unwrap());
    }
    Corpus {
        name: "grad".into(),
        sentences,
    }
}

#[test]
fn gradients_match_central_finite_differences() {
    let started = Instant::now();
    let h = 1e-5;
    let mut worst_model = 0.0_f64;
    let mut worst_loss = 0.0_f64;

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        // Loss level: value/gradient agreement for all three losses.
        let n = 12;
        let mut labels: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.4) { 1 } else { -1 }).collect();
        labels[0] = 1;
        labels[1] = -1;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let mut dual = HeadDualState::new(1.0, 0.3);
        dual.a = rng.random_range(-0.5..1.5);
        dual.b = rng.random_range(-0.5..1.5);
        dual.alpha = rng.random_range(0.1..1.0);

        let auc = auc_margin_loss(&scores, &labels, &dual).unwrap();
        for i in 0..n {
            let mut plus = scores.clone();
            plus[i] += h;
            let mut minus = scores.clone();
            minus[i] -= h;
            let numeric = (auc_margin_loss(&plus, &labels, &dual).unwrap().loss
                - auc_margin_loss(&minus, &labels, &dual).unwrap().loss)
                / (2.0 * h);
            worst_loss = worst_loss.max(rel_err(auc.d_scores[i], numeric));
        }
        for (pick, analytic) in [(0, auc.d_a), (1, auc.d_b), (2, auc.d_alpha)] {
            let eval = |delta: f64| {
                let mut d = dual;
                match pick {
                    0 => d.a += delta,
                    1 => d.b += delta,
                    _ => d.alpha += delta,
                }
                auc_margin_loss(&scores, &labels, &d).unwrap().loss
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            worst_loss = worst_loss.max(rel_err(analytic, numeric));
        }

        let (_, d_bce) = bce_loss(&scores, &labels).unwrap();
        for i in 0..n {
            let mut plus = scores.clone();
            plus[i] += h;
            let mut minus = scores.clone();
            minus[i] -= h;
            let numeric =
                (bce_loss(&plus, &labels).unwrap().0 - bce_loss(&minus, &labels).unwrap().0)
                    / (2.0 * h);
            worst_loss = worst_loss.max(rel_err(d_bce[i], numeric));
        }

        let (l, k) = (6, 3);
        let logits = Array2::from_shape_fn((l, k), |_| rng.random_range(-2.0..2.0));
        let gold: Vec<usize> = (0..l).map(|_| rng.random_range(0..k)).collect();
        let (_, d_logits) = ce_loss(&logits, &gold).unwrap();
        for r in 0..l {
            for c in 0..k {
                let mut plus = logits.clone();
                plus[[r, c]] += h;
                let mut minus = logits.clone();
                minus[[r, c]] -= h;
                let numeric = (ce_loss(&plus, &gold).unwrap().0
                    - ce_loss(&minus, &gold).unwrap().0)
                    / (2.0 * h);
                worst_loss = worst_loss.max(rel_err(d_logits[[r, c]], numeric));
            }
        }

        // Model level: encoder + heads through each training objective.
        let corpus = random_grad_corpus(&mut rng);
        let label_set = build_label_set(&corpus);
        let vocab = build_vocabulary(&corpus, 1);
        let dims = EncoderDims {
            word_dim: 3,
            case_dim: 3,
            hidden_dim: 4,
            window: 1,
        };
        let duals: Vec<HeadDualState> = (0..label_set.len())
            .map(|_| {
                let mut d = HeadDualState::new(1.0, rng.random_range(0.05..0.5));
                d.a = rng.random_range(-0.5..1.0);
                d.b = rng.random_range(-0.5..1.0);
                d.alpha = rng.random_range(0.0..1.0);
                d
            })
            .collect();
        for (kind, method) in [
            (LossKind::Auc, Method::OvaAuc),
            (LossKind::Bce, Method::OvaBce),
            (LossKind::Ce, Method::Ce),
        ] {
            let mut state =
                init_model(label_set.clone(), vocab.clone(), dims, method, seed.wrapping_add(97));
            let grads = model_gradients(&state, &corpus, &duals, kind);
            for slot in slots(&state) {
                nudge(&mut state, slot, h);
                let up = objective(&state, &corpus, &duals, kind);
                nudge(&mut state, slot, -2.0 * h);
                let down = objective(&state, &corpus, &duals, kind);
                nudge(&mut state, slot, h);
                let numeric = (up - down) / (2.0 * h);
                worst_model = worst_model.max(rel_err(analytic_grad(&grads, slot), numeric));
            }
        }
    }

    assert!(
        worst_loss <= 1e-6,
        "loss-level gradient mismatch: worst relative error {worst_loss:.3e} > 1e-6"
    );
    assert!(
        worst_model <= 1e-4,
        "model-level gradient mismatch: worst relative error {worst_model:.3e} > 1e-4"
    );
    assert!(started.elapsed().as_secs() < 30);
    println!(
        "PASS gradient check: 20 seeds, worst loss-level rel err {worst_loss:.2e} (<=1e-6), worst model-level {worst_model:.2e} (<=1e-4), {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// ----------------------------------------------------------- dual dynamics

#[test]
fn dual_iterates_reach_the_closed_form_saddle() {
    let started = Instant::now();
    let opt = OptimizerConfig::default();
    let mut worst = 0.0_f64;
    for (case, margin, spread) in [(0u64, 1.0, 0.0), (1, 1.0, 0.2), (2, 0.3, 0.35), (3, 1.0, 0.1)] {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let n = 60;
        let mut labels: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.45) { 1 } else { -1 }).collect();
        labels[0] = 1;
        labels[1] = -1;
        // `spread` separates the classes; at 0.35 with margin 0.3 the
        // optimum hits the α ≥ 0 projection boundary.
        let scores: Vec<f64> = labels
            .iter()
            .map(|&z| {
                let base: f64 = if z == 1 { 0.5 + spread } else { 0.5 - spread };
                (base + rng.random_range(-0.1..0.1)).clamp(0.01, 0.99)
            })
            .collect();
        let n_pos = labels.iter().filter(|&&z| z == 1).count();
        let p = n_pos as f64 / n as f64;

        let mut dual = HeadDualState::new(margin, p);
        for _ in 0..2000 {
            let g = auc_margin_loss(&scores, &labels, &dual).unwrap();
            step_dual(&mut dual, g.d_a, g.d_b, g.d_alpha, &opt, 0).unwrap();
        }

        let pos_mean = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &z)| z == 1)
            .map(|(h, _)| h)
            .sum::<f64>()
            / n_pos as f64;
        let neg_mean = scores
            .iter()
            .zip(&labels)
            .filter(|(_, &z)| z == -1)
            .map(|(h, _)| h)
            .sum::<f64>()
            / (n - n_pos) as f64;
        let (a_star, b_star, alpha_star) = dual_optima(pos_mean, neg_mean, margin);
        if margin < 1.0 {
            assert_eq!(alpha_star, 0.0, "case {case} must exercise the projection");
        }
        for (got, want) in [(dual.a, a_star), (dual.b, b_star), (dual.alpha, alpha_star)] {
            worst = worst.max((got - want).abs());
        }
    }
    assert!(
        worst <= 1e-3,
        "dual iterates ended {worst:.2e} from the closed-form saddle (tolerance 1e-3)"
    );
    assert!(started.elapsed().as_secs() < 5);
    println!(
        "PASS dual stationarity: 4 frozen-score systems within {worst:.2e} of (mean+, mean-, max(0, m-a+b)) after <=2000 steps, {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// ------------------------------------------------------------- AUC oracles

fn auc_pairwise(scores: &[f64], labels: &[i8]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &z)| z == 1)
        .map(|(&h, _)| h)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &z)| z == -1)
        .map(|(&h, _)| h)
        .collect();
    let mut wins = 0.0;
    for &hp in &pos {
        for &hn in &neg {
            if hp > hn {
                wins += 1.0;
            } else if hp == hn {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() as f64 * neg.len() as f64)
}

fn auc_trapezoid(scores: &[f64], labels: &[i8]) -> f64 {
    let mut pairs: Vec<(f64, i8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let n_pos = labels.iter().filter(|&&z| z == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let (mut tp, mut fp, mut area) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < pairs.len() {
        let threshold = pairs[i].0;
        let (mut d_tp, mut d_fp) = (0.0, 0.0);
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 == 1 {
                d_tp += 1.0;
            } else {
                d_fp += 1.0;
            }
            i += 1;
        }
        // a tie block is a single diagonal ROC segment
        area += (d_fp / n_neg) * (tp + (tp + d_tp)) / (2.0 * n_pos);
        tp += d_tp;
        fp += d_fp;
    }
    let _ = fp;
    area
}

#[test]
fn auc_implementations_agree_to_1e12() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let mut labels: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.3) { 1 } else { -1 }).collect();
        labels[0] = 1;
        if n > 1 {
            labels[1] = -1;
        }
        // scores on a coarse grid force plenty of exact ties
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..=20) as f64 / 20.0)
            .collect();
        let sorted = token_auc(&scores, &labels).unwrap();
        let pairwise = auc_pairwise(&scores, &labels);
        let trapezoid = auc_trapezoid(&scores, &labels);
        worst = worst
            .max((sorted - pairwise).abs())
            .max((sorted - trapezoid).abs())
            .max((pairwise - trapezoid).abs());
    }
    assert!(
        worst <= 1e-12,
        "AUC implementations disagree by {worst:.2e} (tolerance 1e-12)"
    );
    assert!(started.elapsed().as_secs() < 5);
    println!(
        "PASS AUC oracles: sort-based vs pairwise vs trapezoid within {worst:.2e} on 100 tied score sets, {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// -------------------------------------------------------- entity-F1 oracle

/// Independent span matcher: an entity tag opens a span; `I-` of the same
/// type extends it; everything else closes it.
fn oracle_spans(tags: &[String]) -> Vec<(usize, usize, String)> {
    fn parse(t: &str) -> Option<(char, &str)> {
        let (p, ty) = t.split_once('-')?;
        Some((p.chars().next().unwrap(), ty))
    }
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        match parse(&tags[i]) {
            None => i += 1,
            Some((_, ty)) => {
                let start = i;
                i += 1;
                while i < tags.len() {
                    match parse(&tags[i]) {
                        Some(('I', t2)) if t2 == ty => i += 1,
                        _ => break,
                    }
                }
                spans.push((start, i - 1, ty.to_string()));
            }
        }
    }
    spans
}

#[test]
fn span_f1_matches_a_brute_force_matcher() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let tagset = [
        "O", "O", "O", "O", "O", "O", "B-A", "B-B", "B-C", "I-A", "I-B", "I-C",
    ];
    let mut sentences = Vec::new();
    let mut predictions = Vec::new();
    for _ in 0..1000 {
        let len = rng.random_range(1..=30);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..len)
                .map(|_| tagset.choose(rng).unwrap().to_string())
                .collect()
        };
        let gold = draw(&mut rng);
        let pred = draw(&mut rng);
        sentences.push(Sentence::new(vec!["t".into(); len], gold).unwrap());
        predictions.push(pred);
    }
    let corpus = Corpus {
        name: "spans".into(),
        sentences,
    };

    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    let mut support: BTreeMap<String, usize> = BTreeMap::new();
    for (sentence, pred) in corpus.sentences.iter().zip(&predictions) {
        let gold_spans = oracle_spans(&sentence.labels);
        let pred_spans = oracle_spans(pred);

        // span lists themselves must agree with the library decoder
        for (tags, want) in [(&sentence.labels, &gold_spans), (pred, &pred_spans)] {
            let got: Vec<(usize, usize, String)> = decode_spans(tags)
                .into_iter()
                .map(|s| (s.start, s.end, s.entity_type))
                .collect();
            assert_eq!(&got, want, "span decodings disagree on {tags:?}");
        }

        n_gold += gold_spans.len();
        n_pred += pred_spans.len();
        tp += pred_spans.iter().filter(|s| gold_spans.contains(s)).count();
        for (_, _, ty) in &gold_spans {
            *support.entry(ty.clone()).or_insert(0) += 1;
        }
    }
    let precision = if n_pred > 0 { tp as f64 / n_pred as f64 } else { 0.0 };
    let recall = if n_gold > 0 { tp as f64 / n_gold as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    let got = entity_f1(&corpus, &predictions).unwrap();
    assert_eq!(got.precision, precision, "precision differs from the oracle");
    assert_eq!(got.recall, recall, "recall differs from the oracle");
    assert_eq!(got.f1, f1, "F1 differs from the oracle");
    assert_eq!(got.support, support, "per-type gold counts differ");
    assert!(started.elapsed().as_secs() < 10);
    println!(
        "PASS span scoring: decoder and scorer match the brute-force matcher exactly on 1000 random BIO sequences (F1 {:.4}), {:.1}s",
        f1,
        started.elapsed().as_secs_f64()
    );
}

// --------------------------------------------------------------- sampling

#[test]
fn imbalance_sampler_hits_all_targets() {
    let started = Instant::now();
    let pool = synth_corpus(
        "pool10k",
        &GenConfig {
            sentences: 10_000,
            entity_sentence_prob: 0.45,
            extra_entity_prob: 0.5,
            seed: 21,
        },
    );
    let natural = entity_token_pct(&pool);
    let mut worst = 0.0_f64;
    for &target in &[1.0, 2.0, 5.0, 10.0] {
        for &size in &[50usize, 100] {
            for seed in 0..10u64 {
                let subset = sample_imbalanced(
                    &pool,
                    &SampleSpec::imbalanced(size, target, seed.wrapping_mul(7919) + size as u64),
                )
                .unwrap_or_else(|e| panic!("target {target}% size {size} seed {seed}: {e}"));
                assert_eq!(subset.sentences.len(), size);
                let got = entity_token_pct(&subset);
                worst = worst.max((got - target).abs());
            }
        }
    }
    assert!(
        worst <= 0.5,
        "imbalance sampler missed a target by {worst:.3} percentage points (tolerance 0.5)"
    );
    assert!(started.elapsed().as_secs() < 30);
    println!(
        "PASS imbalance sampler: 4 targets x 2 sizes x 10 seeds on a 10,000-sentence pool ({natural:.1}% natural), worst miss {worst:.3}pp (<=0.5), {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// ------------------------------------------------- low-resource benchmark

const BENCH_METHODS: [Method; 4] = [Method::Ce, Method::OvaBce, Method::OvaAuc, Method::OvaAucMaml];
const BENCH_SEEDS: u64 = 10;

fn bench_config(method: Method, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(method);
    cfg.seed = seed;
    cfg.word_dim = 16;
    cfg.case_dim = 4;
    cfg.hidden_dim = 24;
    cfg
}

/// Per-method test F1 for 10 paired seeds at 50 training sentences,
/// computed once and shared by the comparison tests.
fn benchmark() -> &'static BTreeMap<Method, Vec<f64>> {
    static BENCH: OnceLock<BTreeMap<Method, Vec<f64>>> = OnceLock::new();
    BENCH.get_or_init(|| {
        let started = Instant::now();
        let gen = |name: &str, sentences, seed| {
            synth_corpus(
                name,
                &GenConfig {
                    sentences,
                    entity_sentence_prob: 0.45,
                    extra_entity_prob: 0.0,
                    seed,
                },
            )
        };
        let pool = gen("pool", 400, 11);
        let dev = gen("dev", 60, 12);
        let test = gen("test", 150, 13);

        let runs: Vec<(Method, u64)> = BENCH_METHODS
            .iter()
            .flat_map(|&m| (0..BENCH_SEEDS).map(move |s| (m, s)))
            .collect();
        let f1s: Vec<(Method, u64, f64)> = runs
            .par_iter()
            .map(|&(method, seed)| {
                let subset = grid_sample(&pool, 50, None, seed).unwrap();
                let cfg = bench_config(method, seed);
                let (model, _) = train(&subset, &dev, &cfg).unwrap();
                let f1 = evaluate_model(&model, &test).unwrap().f1;
                (method, seed, f1)
            })
            .collect();

        let mut by_method: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
        for &(method, seed, f1) in &f1s {
            let list = by_method.entry(method).or_insert_with(|| vec![0.0; BENCH_SEEDS as usize]);
            list[seed as usize] = f1;
        }
        let means: Vec<String> = BENCH_METHODS
            .iter()
            .map(|m| {
                let v = &by_method[m];
                format!("{} {:.3}", m.as_str(), v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        println!(
            "benchmark (50 sentences, 10 seeds, {:.1}s): mean F1 {}",
            started.elapsed().as_secs_f64(),
            means.join(", ")
        );
        by_method
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn auc_training_beats_both_baselines_in_low_resource() {
    let started = Instant::now();
    let bench = benchmark();
    let auc = &bench[&Method::OvaAuc];
    for baseline in [Method::Ce, Method::OvaBce] {
        let base = &bench[&baseline];
        let margin = mean(auc) - mean(base);
        let wins = auc.iter().zip(base).filter(|(a, b)| a > b).count();
        assert!(
            margin >= 0.05,
            "ova-auc leads {} by only {:.1} F1 points (needs >= 5): auc {:?} vs {:?}",
            baseline.as_str(),
            margin * 100.0,
            auc,
            base
        );
        assert!(
            wins >= 8,
            "ova-auc beats {} in only {wins}/10 paired seeds (needs >= 8)",
            baseline.as_str()
        );
        println!(
            "PASS low-resource margin vs {}: +{:.1} F1 points, {}/10 paired wins",
            baseline.as_str(),
            margin * 100.0,
            wins
        );
    }
    assert!(started.elapsed().as_secs() < 600);
}

#[test]
fn grouped_and_sampled_strategies_are_on_par() {
    let bench = benchmark();
    let gap = (mean(&bench[&Method::OvaAuc]) - mean(&bench[&Method::OvaAucMaml])).abs();
    assert!(
        gap <= 0.05,
        "strategy gap {:.1} F1 points exceeds 5: {:?} vs {:?}",
        gap * 100.0,
        bench[&Method::OvaAuc],
        bench[&Method::OvaAucMaml]
    );
    println!(
        "PASS strategy parity: |ova-auc - ova-auc-maml| = {:.1} F1 points (<= 5)",
        gap * 100.0
    );
}

// ------------------------------------------------------------ determinism

#[test]
fn repeated_runs_are_byte_identical() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = |name: &str, sentences, seed| {
        synth_corpus(
            name,
            &GenConfig {
                sentences,
                entity_sentence_prob: 0.45,
                extra_entity_prob: 0.0,
                seed,
            },
        )
    };
    let pool = gen("pool", 60, 31);
    let dev = gen("dev", 12, 32);
    write_conll(&pool, d.join("pool.conll")).unwrap();
    write_conll(&dev, d.join("dev.conll")).unwrap();

    // train twice, save twice
    let mut cfg = bench_config(Method::OvaAuc, 3);
    cfg.max_epochs = 6;
    cfg.patience = 6;
    let sub = grid_sample(&pool, 12, None, 3).unwrap();
    for name in ["m1.nermodel", "m2.nermodel"] {
        let (model, _) = train(&sub, &dev, &cfg).unwrap();
        save_model(&model, d.join(name)).unwrap();
    }
    let m1 = std::fs::read(d.join("m1.nermodel")).unwrap();
    let m2 = std::fs::read(d.join("m2.nermodel")).unwrap();
    assert_eq!(m1, m2, "repeated training must serialize identically");

    // a small grid twice, with different parallelism
    let spec = ExperimentSpec {
        train_path: d.join("pool.conll").to_str().unwrap().into(),
        dev_path: d.join("dev.conll").to_str().unwrap().into(),
        test_path: d.join("dev.conll").to_str().unwrap().into(),
        methods: vec![Method::Ce, Method::OvaAuc],
        sizes: vec![10],
        entity_pcts: None,
        seeds: vec![0, 1],
        overrides: TrainOverrides {
            max_epochs: Some(4),
            patience: Some(4),
            word_dim: Some(6),
            case_dim: Some(3),
            hidden_dim: Some(8),
            ..TrainOverrides::default()
        },
    };
    let (out_a, out_b) = (d.join("a"), d.join("b"));
    run_grid(&spec, &out_a, 2).unwrap();
    run_grid(&spec, &out_b, 1).unwrap();
    write_summary(&out_a, &out_a.join("summary.csv")).unwrap();
    write_summary(&out_b, &out_b.join("summary.csv")).unwrap();
    for rel in [
        "summary.csv",
        "summary_long.csv",
        "manifest.json",
        "runs/ce_s10_pnone_seed0.csv",
        "runs/ce_s10_pnone_seed1.csv",
        "runs/ova-auc_s10_pnone_seed0.csv",
        "runs/ova-auc_s10_pnone_seed1.csv",
    ] {
        let a = std::fs::read(out_a.join(rel)).unwrap();
        let b = std::fs::read(out_b.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between repeated grid runs");
    }
    println!(
        "PASS determinism: repeated train/eval/experiment runs byte-identical across 9 artifacts, {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// ----------------------------------------------------------- real corpora

fn conll_dir() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("CONLL2003_DIR") {
        let p = PathBuf::from(dir);
        if p.is_dir() {
            return Some(p);
        }
    }
    let fallback = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/conll2003");
    fallback.is_dir().then_some(fallback)
}

fn find_split(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

#[test]
fn conll2003_statistics_match_when_data_is_present() {
    let Some(dir) = conll_dir() else {
        println!(
            "SKIP CoNLL 2003 check: no corpus found (set CONLL2003_DIR or place files under data/conll2003/)"
        );
        return;
    };
    let splits = [
        ("train", &["train.txt", "eng.train"][..], 14_040usize, 203_589usize, "11.5/5.2/83.3"),
        ("dev", &["valid.txt", "dev.txt", "eng.testa"][..], 3_249, 51_319, "11.6/5.1/83.3"),
        ("test", &["test.txt", "eng.testb"][..], 3_452, 46_376, "12.2/5.3/82.5"),
    ];
    for (split, names, sentences, tokens, bio) in splits {
        let Some(path) = find_split(&dir, names) else {
            println!("SKIP CoNLL 2003 check: no {split} file among {names:?} in {}", dir.display());
            return;
        };
        let corpus = load_conll(&path).unwrap();
        let stats = corpus_stats(&corpus);
        assert_eq!(stats.sentences, sentences, "{split} sentence count");
        assert_eq!(stats.tokens, tokens, "{split} token count");
        let got = format!("{:.1}/{:.1}/{:.1}", stats.pct_b(), stats.pct_i(), stats.pct_o());
        assert_eq!(got, bio, "{split} B/I/O percentages");
        if split == "train" {
            assert_eq!(build_label_set(&corpus).len(), 9, "train label count");
        }
    }
    println!("PASS CoNLL 2003 statistics: all three splits match the published sentence/token counts and B/I/O percentages");
}
