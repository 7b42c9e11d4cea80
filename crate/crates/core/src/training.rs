//! The four training strategies — softmax CE, OVA-BCE, prefix-grouped
//! OVA-AUC, and head-sampled OVA-AUC-MAML — over shared batching, seeding,
//! and early stopping.

use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{binarize_labels, build_label_set, build_vocabulary, Corpus, LabelSet};
use crate::evaluation::evaluate_model;
use crate::losses::{auc_margin_loss, bce_loss, ce_loss, dual_optima, HeadDualState, Method};
use crate::model::{
    backward_into, encode, head_score, init_model, multiclass_logits, EncoderDims, Forward,
    ModelGradients, ModelState, Upstream,
};
use crate::optimizer::{step_dual, step_primal, OptimizerConfig};
use crate::{Error, Result};

fn default_batch_sentences() -> usize {
    8
}
fn default_max_epochs() -> usize {
    100
}
fn default_patience() -> usize {
    10
}
fn default_margin() -> f64 {
    1.0
}
fn default_vocab_min_count() -> usize {
    1
}
fn default_word_dim() -> usize {
    EncoderDims::default().word_dim
}
fn default_case_dim() -> usize {
    EncoderDims::default().case_dim
}
fn default_hidden_dim() -> usize {
    EncoderDims::default().hidden_dim
}
fn default_window() -> usize {
    EncoderDims::default().window
}
fn default_lr_primal() -> f64 {
    OptimizerConfig::default().lr_primal
}
fn default_lr_dual() -> f64 {
    OptimizerConfig::default().lr_dual
}
fn default_lr_decay() -> f64 {
    OptimizerConfig::default().lr_decay
}
fn default_momentum() -> f64 {
    OptimizerConfig::default().momentum
}

/// Everything a run needs besides the corpora. Deserializes from a flat
/// JSON object; unknown keys are rejected so a typo cannot silently fall
/// back to a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    #[serde(default = "default_batch_sentences")]
    pub batch_sentences: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Epochs without a dev entity-F1 improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Heads sampled per epoch by `ova-auc-maml`; `None` means ⌈K/3⌉.
    #[serde(default)]
    pub maml_m: Option<usize>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_vocab_min_count")]
    pub vocab_min_count: usize,
    #[serde(default = "default_word_dim")]
    pub word_dim: usize,
    #[serde(default = "default_case_dim")]
    pub case_dim: usize,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_lr_primal")]
    pub lr_primal: f64,
    #[serde(default = "default_lr_dual")]
    pub lr_dual: f64,
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

impl TrainConfig {
    /// All defaults for the given method.
    pub fn new(method: Method) -> TrainConfig {
        TrainConfig {
            method,
            batch_sentences: default_batch_sentences(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            maml_m: None,
            margin: default_margin(),
            seed: 0,
            vocab_min_count: default_vocab_min_count(),
            word_dim: default_word_dim(),
            case_dim: default_case_dim(),
            hidden_dim: default_hidden_dim(),
            window: default_window(),
            lr_primal: default_lr_primal(),
            lr_dual: default_lr_dual(),
            lr_decay: default_lr_decay(),
            momentum: default_momentum(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            lr_primal: self.lr_primal,
            lr_dual: self.lr_dual,
            lr_decay: self.lr_decay,
            momentum: self.momentum,
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            word_dim: self.word_dim,
            case_dim: self.case_dim,
            hidden_dim: self.hidden_dim,
            window: self.window,
        }
    }

    /// `maml_m` with its ⌈K/3⌉ default filled in.
    pub fn maml_m_for(&self, k: usize) -> usize {
        self.maml_m.unwrap_or(k.div_ceil(3))
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.batch_sentences == 0 {
            return Err(Error::Config("batch_sentences must be at least 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if self.vocab_min_count == 0 {
            return Err(Error::Config("vocab_min_count must be at least 1".into()));
        }
        if self.word_dim == 0 || self.case_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("encoder dimensions must be at least 1".into()));
        }
        let m = self.maml_m_for(k);
        if m == 0 || m > k {
            return Err(Error::Config(format!("maml_m {m} must lie in 1..=K ({k})")));
        }
        self.optimizer().validate()
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: f64,
}

/// CSV `epoch,train_loss,dev_f1` with six decimal places.
pub fn write_train_log(path: impl AsRef<Path>, log: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "dev_f1"])?;
    for r in log {
        w.write_record([
            r.epoch.to_string(),
            format!("{:.6}", r.train_loss),
            format!("{:.6}", r.dev_f1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-epoch sub-seed: shuffles are independent across epochs yet fully
/// reproducible from the run seed.
pub(crate) fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    splitmix64(seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

const SHUFFLE_SALT: u64 = 0x5A5A_0F0F_3C3C_A5A5;
const HEAD_SALT: u64 = 0x7E7E_1B1B_D4D4_2929;

/// Separate deterministic stream per (epoch, purpose, lane) so batch
/// shuffles stay identical across methods regardless of how many other
/// draws a method makes.
fn stream_rng(eseed: u64, salt: u64, lane: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(eseed ^ salt) ^ lane))
}

/// Shuffled sentence indices chunked into batches. Each pass re-shuffles;
/// every sentence lands in exactly one batch per pass.
pub(crate) fn batch_order(n: usize, batch_sentences: usize, eseed: u64, pass: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(eseed, SHUFFLE_SALT, pass));
    idx.chunks(batch_sentences.max(1)).map(<[usize]>::to_vec).collect()
}

/// `m` distinct head indices for this epoch, uniformly without replacement,
/// in ascending order.
pub(crate) fn sample_heads(eseed: u64, k: usize, m: usize) -> Vec<usize> {
    let mut picked =
        rand::seq::index::sample(&mut stream_rng(eseed, HEAD_SALT, 0), k, m).into_vec();
    picked.sort_unstable();
    picked
}

/// Head indices grouped by tag prefix, in B-*, I-*, O order, empty groups
/// dropped.
pub(crate) fn prefix_groups(label_set: &LabelSet) -> Vec<Vec<usize>> {
    let (mut b, mut i, mut o) = (Vec::new(), Vec::new(), Vec::new());
    for (k, label) in label_set.labels().iter().enumerate() {
        if label.starts_with("B-") {
            b.push(k);
        } else if label.starts_with("I-") {
            i.push(k);
        } else {
            o.push(k);
        }
    }
    [b, i, o].into_iter().filter(|g| !g.is_empty()).collect()
}

struct Trainer<'a> {
    state: ModelState,
    duals: Vec<HeadDualState>,
    velocity: ModelGradients,
    grads: ModelGradients,
    train: &'a Corpus,
    /// Per sentence, per head: ±1 token labels. Empty for `ce`.
    bins: Vec<Vec<Vec<i8>>>,
    /// Per sentence: gold label indices. Empty unless `ce`.
    gold: Vec<Vec<usize>>,
    opt: OptimizerConfig,
    batch_sentences: usize,
}

impl Trainer<'_> {
    fn forwards(&self, ids: &[usize]) -> (Vec<Forward>, Vec<usize>, usize) {
        let forwards: Vec<Forward> = ids
            .iter()
            .map(|&i| encode(&self.state, &self.train.sentences[i]))
            .collect();
        let lens: Vec<usize> = forwards.iter().map(|f| f.features.nrows()).collect();
        let total = lens.iter().sum();
        (forwards, lens, total)
    }

    /// One joint step on the summed loss of `heads` over one batch of whole
    /// sentences. Every token contributes to every listed head exactly once.
    fn ova_batch(&mut self, ids: &[usize], heads: &[usize], epoch: usize, auc: bool) -> Result<f64> {
        let (forwards, lens, total) = self.forwards(ids);
        let mut upstream: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::with_capacity(heads.len()); ids.len()];
        let mut dual_steps = Vec::new();
        let mut batch_loss = 0.0;
        for &k in heads {
            let mut scores = Vec::with_capacity(total);
            let mut labels = Vec::with_capacity(total);
            for (j, &i) in ids.iter().enumerate() {
                scores.extend(head_score(&self.state, &forwards[j].features, k));
                labels.extend_from_slice(&self.bins[i][k]);
            }
            let d_scores = if auc {
                let g = auc_margin_loss(&scores, &labels, &self.duals[k])?;
                batch_loss += g.loss;
                dual_steps.push((k, g.d_a, g.d_b, g.d_alpha));
                g.d_scores
            } else {
                let (loss, d_scores) = bce_loss(&scores, &labels)?;
                batch_loss += loss;
                d_scores
            };
            let mut off = 0;
            for (j, &l) in lens.iter().enumerate() {
                upstream[j].push((k, d_scores[off..off + l].to_vec()));
                off += l;
            }
        }
        self.grads.fill_zero();
        for (j, fw) in forwards.iter().enumerate() {
            backward_into(&self.state, fw, &Upstream::HeadScores(&upstream[j]), &mut self.grads)?;
        }
        step_primal(&mut self.state, &self.grads, &mut self.velocity, &self.opt, epoch)?;
        for (k, d_a, d_b, d_alpha) in dual_steps {
            step_dual(&mut self.duals[k], d_a, d_b, d_alpha, &self.opt, epoch)?;
        }
        Ok(batch_loss)
    }

    fn ce_batch(&mut self, ids: &[usize], epoch: usize) -> Result<f64> {
        let (forwards, lens, total) = self.forwards(ids);
        let k = self.state.label_set.len();
        let mut logits = Array2::zeros((total, k));
        let mut gold = Vec::with_capacity(total);
        let mut off = 0;
        for (j, &i) in ids.iter().enumerate() {
            let lg = multiclass_logits(&self.state, &forwards[j].features)?;
            logits.slice_mut(s![off..off + lens[j], ..]).assign(&lg);
            gold.extend_from_slice(&self.gold[i]);
            off += lens[j];
        }
        let (loss, d_logits) = ce_loss(&logits, &gold)?;
        self.grads.fill_zero();
        let mut off = 0;
        for (j, fw) in forwards.iter().enumerate() {
            let up = d_logits.slice(s![off..off + lens[j], ..]).to_owned();
            backward_into(&self.state, fw, &Upstream::MulticlassLogits(&up), &mut self.grads)?;
            off += lens[j];
        }
        step_primal(&mut self.state, &self.grads, &mut self.velocity, &self.opt, epoch)?;
        Ok(loss)
    }

    /// One loss-group pass per tag prefix, batches re-shuffled per pass; the
    /// pass jointly optimizes the sum over that group's heads.
    fn epoch_ova_auc(&mut self, epoch: usize, eseed: u64, groups: &[Vec<usize>]) -> Result<f64> {
        let n = self.train.sentences.len();
        let mut losses = Vec::new();
        for (pass, group) in groups.iter().enumerate() {
            for batch in batch_order(n, self.batch_sentences, eseed, pass as u64) {
                losses.push(self.ova_batch(&batch, group, epoch, true)?);
            }
        }
        Ok(mean(&losses))
    }

    /// One pass on the summed loss of `m` heads sampled for this epoch.
    fn epoch_ova_auc_maml(&mut self, epoch: usize, eseed: u64, m: usize) -> Result<f64> {
        let heads = sample_heads(eseed, self.state.heads.len(), m);
        let n = self.train.sentences.len();
        let mut losses = Vec::new();
        for batch in batch_order(n, self.batch_sentences, eseed, 0) {
            losses.push(self.ova_batch(&batch, &heads, epoch, true)?);
        }
        Ok(mean(&losses))
    }

    fn epoch_ova_bce(&mut self, epoch: usize, eseed: u64, all_heads: &[usize]) -> Result<f64> {
        let n = self.train.sentences.len();
        let mut losses = Vec::new();
        for batch in batch_order(n, self.batch_sentences, eseed, 0) {
            losses.push(self.ova_batch(&batch, all_heads, epoch, false)?);
        }
        Ok(mean(&losses))
    }

    fn epoch_ce(&mut self, epoch: usize, eseed: u64) -> Result<f64> {
        let n = self.train.sentences.len();
        let mut losses = Vec::new();
        for batch in batch_order(n, self.batch_sentences, eseed, 0) {
            losses.push(self.ce_batch(&batch, epoch)?);
        }
        Ok(mean(&losses))
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Trains `cfg.method` on `train`, selecting the epoch snapshot with the
/// best dev entity-F1 (strict improvement; ties keep the earlier epoch).
/// Returns that snapshot and the per-epoch log. Fully deterministic in
/// (train, dev, cfg).
pub fn train(train: &Corpus, dev: &Corpus, cfg: &TrainConfig) -> Result<(ModelState, Vec<EpochRecord>)> {
    if train.sentences.is_empty() {
        return Err(Error::Invalid("empty training corpus".into()));
    }
    let label_set = build_label_set(train);
    cfg.validate(label_set.len())?;
    for s in &dev.sentences {
        for label in &s.labels {
            if label_set.index_of(label).is_none() {
                return Err(Error::Invalid(format!(
                    "dev label `{label}` does not occur in the training corpus"
                )));
            }
        }
    }
    let vocabulary = build_vocabulary(train, cfg.vocab_min_count);
    let state = init_model(label_set, vocabulary, cfg.dims(), cfg.method, cfg.seed);
    let k = state.label_set.len();

    let mut duals = Vec::new();
    let mut bins = Vec::new();
    let mut gold = Vec::new();
    if cfg.method == Method::Ce {
        for s in &train.sentences {
            let mut idx = Vec::with_capacity(s.len());
            for label in &s.labels {
                idx.push(state.label_set.index_of(label).expect("training label is in the set"));
            }
            gold.push(idx);
        }
    } else {
        for s in &train.sentences {
            let mut per_head = Vec::with_capacity(k);
            for kk in 0..k {
                per_head.push(binarize_labels(s, state.label_set.label(kk), &state.label_set)?);
            }
            bins.push(per_head);
        }
        if cfg.method.uses_duals() {
            // Warm-start each head's auxiliaries at their closed-form optima
            // for the initial score distribution. Zero-started auxiliaries
            // would spend the early epochs contracting both classes toward 0
            // while α slowly ramps up, stalling separation entirely on small
            // corpora where dual steps are rare.
            let total = train.token_count() as f64;
            let mut pos_sum = vec![0.0; k];
            let mut pos_n = vec![0usize; k];
            let mut neg_sum = vec![0.0; k];
            for (s, per_head) in train.sentences.iter().zip(&bins) {
                let fwd = encode(&state, s);
                for kk in 0..k {
                    for (h, &z) in head_score(&state, &fwd.features, kk).iter().zip(&per_head[kk]) {
                        if z == 1 {
                            pos_sum[kk] += h;
                            pos_n[kk] += 1;
                        } else {
                            neg_sum[kk] += h;
                        }
                    }
                }
            }
            for kk in 0..k {
                let n_pos = pos_n[kk];
                let n_neg = train.token_count() - n_pos;
                let pos_mean = if n_pos > 0 { pos_sum[kk] / n_pos as f64 } else { 0.5 };
                let neg_mean = if n_neg > 0 { neg_sum[kk] / n_neg as f64 } else { 0.5 };
                let (a, b, alpha) = dual_optima(pos_mean, neg_mean, cfg.margin);
                let mut dual = HeadDualState::new(cfg.margin, n_pos as f64 / total);
                dual.a = a;
                dual.b = b;
                dual.alpha = alpha;
                duals.push(dual);
            }
        }
    }

    let mut log = Vec::new();
    if cfg.max_epochs == 0 {
        return Ok((state, log));
    }

    let groups = prefix_groups(&state.label_set);
    let all_heads: Vec<usize> = (0..k).collect();
    let maml_m = cfg.maml_m_for(k);
    let velocity = ModelGradients::zeros_like(&state);
    let grads = ModelGradients::zeros_like(&state);
    let mut t = Trainer {
        state,
        duals,
        velocity,
        grads,
        train,
        bins,
        gold,
        opt: cfg.optimizer(),
        batch_sentences: cfg.batch_sentences,
    };

    let mut best_state = t.state.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    for epoch in 0..cfg.max_epochs {
        let eseed = epoch_seed(cfg.seed, epoch);
        let train_loss = match cfg.method {
            Method::Ce => t.epoch_ce(epoch, eseed)?,
            Method::OvaBce => t.epoch_ova_bce(epoch, eseed, &all_heads)?,
            Method::OvaAuc => t.epoch_ova_auc(epoch, eseed, &groups)?,
            Method::OvaAucMaml => t.epoch_ova_auc_maml(epoch, eseed, maml_m)?,
        };
        let dev_f1 = evaluate_model(&t.state, dev)?.f1;
        log.push(EpochRecord { epoch, train_loss, dev_f1 });
        if dev_f1 > best_f1 {
            best_f1 = dev_f1;
            best_epoch = epoch;
            best_state = t.state.clone();
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    Ok((best_state, log))
}
