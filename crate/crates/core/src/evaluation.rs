//! Maximum-confidence decoding, entity-level P/R/F1, token-level AUC
//! diagnostics, and per-token probability export.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use ndarray::Array2;

use crate::corpus::{Corpus, LabelSet, Sentence};
use crate::model::{token_scores, ModelState};
use crate::{Error, Result};

/// A maximal entity span; `end` is inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

/// Entity-level scores plus per-head AUC diagnostics (None where the test
/// data has only one class for that head) and per-type gold span counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_head_auc: Vec<(String, Option<f64>)>,
    pub support: BTreeMap<String, usize>,
}

/// Per-token argmax over label scores; exact ties go to the smallest label
/// index, so "O" (index 0) wins a full tie.
pub fn argmax_labels(label_set: &LabelSet, scores: &Array2<f64>) -> Vec<String> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            label_set.label(best).to_string()
        })
        .collect()
}

/// Predicts a tag sequence by maximum confidence over the per-label scores
/// (per-head logistic scores for OVA models, softmax for the multiclass
/// baseline).
pub fn predict_ova(state: &ModelState, sentence: &Sentence) -> Vec<String> {
    argmax_labels(&state.label_set, &token_scores(state, sentence))
}

/// BIO decoding, conlleval convention: `B-X` starts a span, `I-X` continues
/// a same-type span, and an orphan `I-X` (after "O", a different type, or at
/// the start) begins a new span. Spans are maximal and disjoint.
pub fn decode_spans(tags: &[String]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let (prefix, ty) = match tag.split_once('-') {
            Some((p, t)) => (p, t),
            None => ("O", ""),
        };
        let continues = prefix == "I" && matches!(open, Some((_, open_ty)) if open_ty == ty);
        if !continues {
            if let Some((start, open_ty)) = open.take() {
                spans.push(Span {
                    start,
                    end: i - 1,
                    entity_type: open_ty.to_string(),
                });
            }
            if prefix != "O" {
                open = Some((i, ty));
            }
        }
    }
    if let Some((start, open_ty)) = open {
        spans.push(Span {
            start,
            end: tags.len() - 1,
            entity_type: open_ty.to_string(),
        });
    }
    spans
}

/// Renders disjoint spans back to a BIO tag sequence of length `len`.
/// Inverse of [`decode_spans`] on its own output.
pub fn encode_spans(spans: &[Span], len: usize) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for span in spans {
        tags[span.start] = format!("B-{}", span.entity_type);
        for tag in tags.iter_mut().take(span.end + 1).skip(span.start + 1) {
            *tag = format!("I-{}", span.entity_type);
        }
    }
    tags
}

/// Micro-averaged exact-match span scoring of predicted tag sequences
/// against gold. A true positive is an exact (start, end, type) match.
/// Empty denominators score 0. `per_head_auc` is left empty here; see
/// [`evaluate_model`].
pub fn entity_f1(gold: &Corpus, predictions: &[Vec<String>]) -> Result<MetricsRecord> {
    if predictions.len() != gold.sentences.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} sentences",
            predictions.len(),
            gold.sentences.len()
        )));
    }
    let mut tp = 0usize;
    let mut n_pred = 0usize;
    let mut n_gold = 0usize;
    let mut support: BTreeMap<String, usize> = BTreeMap::new();
    for (sentence, pred_tags) in gold.sentences.iter().zip(predictions) {
        if pred_tags.len() != sentence.len() {
            return Err(Error::Shape(format!(
                "{} predicted tags for {} tokens",
                pred_tags.len(),
                sentence.len()
            )));
        }
        let gold_spans = decode_spans(&sentence.labels);
        let pred_spans = decode_spans(pred_tags);
        n_gold += gold_spans.len();
        n_pred += pred_spans.len();
        for span in &gold_spans {
            *support.entry(span.entity_type.clone()).or_insert(0) += 1;
        }
        let gold_set: HashSet<&Span> = gold_spans.iter().collect();
        tp += pred_spans.iter().filter(|s| gold_set.contains(s)).count();
    }
    let precision = if n_pred > 0 { tp as f64 / n_pred as f64 } else { 0.0 };
    let recall = if n_gold > 0 { tp as f64 / n_gold as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricsRecord {
        precision,
        recall,
        f1,
        per_head_auc: Vec::new(),
        support,
    })
}

/// Mann–Whitney AUC with midrank tie handling, O(n log n):
/// (#{h⁺ > h⁻} + ½·#ties) / (n⁺·n⁻).
pub fn token_auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&z| z == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Invalid(
            "token AUC undefined: both classes required".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("finite scores"));

    // midranks over tie groups, 1-based
    let mut rank_pos_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_pos_sum += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_pos_sum - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Scores a frozen model on a corpus: maximum-confidence predictions →
/// entity F1, plus per-head token AUC over all tokens (None for heads whose
/// gold binarization is single-class on this corpus).
pub fn evaluate_model(state: &ModelState, test: &Corpus) -> Result<MetricsRecord> {
    let k = state.label_set.len();
    let mut predictions = Vec::with_capacity(test.sentences.len());
    let mut head_scores: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut head_labels: Vec<Vec<i8>> = vec![Vec::new(); k];
    for sentence in &test.sentences {
        let scores = token_scores(state, sentence);
        predictions.push(argmax_labels(&state.label_set, &scores));
        for head in 0..k {
            let label = state.label_set.label(head);
            for (i, gold) in sentence.labels.iter().enumerate() {
                head_scores[head].push(scores[[i, head]]);
                head_labels[head].push(if gold == label { 1 } else { -1 });
            }
        }
    }
    let mut record = entity_f1(test, &predictions)?;
    record.per_head_auc = (0..k)
        .map(|head| {
            let auc = token_auc(&head_scores[head], &head_labels[head]).ok();
            (state.label_set.label(head).to_string(), auc)
        })
        .collect();
    Ok(record)
}

/// One metrics.csv row; grid columns are None for standalone evaluation.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: String,
    pub corpus: String,
    pub train_size: Option<usize>,
    pub entity_pct: Option<f64>,
    pub seed: Option<u64>,
    pub metrics: MetricsRecord,
}

/// Writes metrics rows with a fixed schema: method, corpus, train_size,
/// entity_pct, seed, precision, recall, f1, then one `auc:<label>` column
/// per head in label order (taken from the first row).
pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let labels: Vec<&str> = rows
        .first()
        .map(|r| r.metrics.per_head_auc.iter().map(|(l, _)| l.as_str()).collect())
        .unwrap_or_default();
    let mut header = vec![
        "method".to_string(),
        "corpus".to_string(),
        "train_size".to_string(),
        "entity_pct".to_string(),
        "seed".to_string(),
        "precision".to_string(),
        "recall".to_string(),
        "f1".to_string(),
    ];
    header.extend(labels.iter().map(|l| format!("auc:{l}")));
    writer.write_record(&header)?;
    for row in rows {
        let row_labels: Vec<&str> = row.metrics.per_head_auc.iter().map(|(l, _)| l.as_str()).collect();
        if row_labels != labels {
            return Err(Error::Invalid(
                "metrics rows disagree on label order".into(),
            ));
        }
        let mut record = vec![
            row.method.clone(),
            row.corpus.clone(),
            row.train_size.map(|v| v.to_string()).unwrap_or_default(),
            row.entity_pct.map(|v| format!("{v}")).unwrap_or_default(),
            row.seed.map(|v| v.to_string()).unwrap_or_default(),
            format!("{:.6}", row.metrics.precision),
            format!("{:.6}", row.metrics.recall),
            format!("{:.6}", row.metrics.f1),
        ];
        record.extend(
            row.metrics
                .per_head_auc
                .iter()
                .map(|(_, auc)| auc.map(|v| format!("{v:.6}")).unwrap_or_default()),
        );
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Exports one row per token: ids, surface form, gold and predicted tags,
/// the winning score, then every head's score in label order (6 decimals).
pub fn export_probs(state: &ModelState, corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec![
        "sentence_id".to_string(),
        "token_index".to_string(),
        "token".to_string(),
        "gold_tag".to_string(),
        "predicted_tag".to_string(),
        "max_score".to_string(),
    ];
    header.extend(state.label_set.labels().iter().map(|l| format!("score:{l}")));
    writer.write_record(&header)?;
    for (sid, sentence) in corpus.sentences.iter().enumerate() {
        let scores = token_scores(state, sentence);
        let predicted = argmax_labels(&state.label_set, &scores);
        for i in 0..sentence.len() {
            let row = scores.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut record = vec![
                sid.to_string(),
                i.to_string(),
                sentence.tokens[i].clone(),
                sentence.labels[i].clone(),
                predicted[i].clone(),
                format!("{max:.6}"),
            ];
            record.extend(row.iter().map(|v| format!("{v:.6}")));
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}
