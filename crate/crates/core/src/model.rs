//! The shared token encoder plus per-label scoring heads, with exact
//! analytic gradients and a self-describing text serialization.
//!
//! The encoder is a one-hidden-layer MLP over a token window: each position
//! concatenates (word embedding ‖ case embedding) for the tokens in
//! [i−w, i+w] (zero rows beyond the sentence edges) and maps through
//! tanh(W·u + b). Heads are logistic scorers on the hidden features; the
//! multiclass head used by the softmax baseline scores all K labels jointly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CasePattern, LabelSet, Sentence, Vocabulary, CASE_PATTERNS};
use crate::losses::Method;
use crate::{Error, Result};

/// Encoder hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderDims {
    pub word_dim: usize,
    pub case_dim: usize,
    pub hidden_dim: usize,
    pub window: usize,
}

impl Default for EncoderDims {
    fn default() -> EncoderDims {
        EncoderDims {
            word_dim: 32,
            case_dim: 8,
            hidden_dim: 64,
            window: 1,
        }
    }
}

impl EncoderDims {
    /// Width of the concatenated window input, (2w+1)(d_e + d_c).
    pub fn input_dim(&self) -> usize {
        (2 * self.window + 1) * (self.word_dim + self.case_dim)
    }
}

/// Shared encoder parameters. `word_emb` has one extra row for unk.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub word_emb: Array2<f64>,
    pub case_emb: Array2<f64>,
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    pub dims: EncoderDims,
}

/// One binary head: logistic regression on the hidden features.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub weight: Array1<f64>,
    pub bias: f64,
}

/// Joint K-way head for the softmax baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassHead {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Full model: encoder, K heads, and (for the softmax baseline only) the
/// multiclass head, plus everything needed to score raw sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub encoder: EncoderParams,
    pub heads: Vec<HeadParams>,
    pub multiclass_head: Option<MulticlassHead>,
    pub label_set: LabelSet,
    pub vocabulary: Vocabulary,
    pub method: Method,
}

/// Logistic squashing, clamped just inside (0,1): f64 rounds σ(t) to exactly
/// 1.0 for t ≳ 37, which would violate the open-interval score contract and
/// blow up log losses. The clamp keeps σ′ = s(1−s) consistent (≈ 0 where
/// clamping bites, matching the true derivative's magnitude).
pub(crate) fn sigmoid(t: f64) -> f64 {
    let s = 1.0 / (1.0 + (-t).exp());
    s.clamp(1e-12, 1.0 - 1e-12)
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            out[[r, c]] = rng.random_range(-0.1..0.1);
        }
    }
    out
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    let mut out = Array1::zeros(len);
    for i in 0..len {
        out[i] = rng.random_range(-0.1..0.1);
    }
    out
}

/// Fresh model with weights uniform in (−0.1, 0.1) from the seed and zero
/// biases. The multiclass head exists exactly when `method` is `ce`.
pub fn init_model(
    label_set: LabelSet,
    vocabulary: Vocabulary,
    dims: EncoderDims,
    method: Method,
    seed: u64,
) -> ModelState {
    assert!(
        dims.word_dim >= 1 && dims.case_dim >= 1 && dims.hidden_dim >= 1,
        "encoder dims must be at least 1"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder = EncoderParams {
        word_emb: uniform_matrix(&mut rng, vocabulary.len() + 1, dims.word_dim),
        case_emb: uniform_matrix(&mut rng, CASE_PATTERNS, dims.case_dim),
        hidden_w: uniform_matrix(&mut rng, dims.hidden_dim, dims.input_dim()),
        hidden_b: Array1::zeros(dims.hidden_dim),
        dims,
    };
    let heads = (0..label_set.len())
        .map(|_| HeadParams {
            weight: uniform_vector(&mut rng, dims.hidden_dim),
            bias: 0.0,
        })
        .collect();
    let multiclass_head = (method == Method::Ce).then(|| MulticlassHead {
        weight: uniform_matrix(&mut rng, label_set.len(), dims.hidden_dim),
        bias: Array1::zeros(label_set.len()),
    });
    ModelState {
        encoder,
        heads,
        multiclass_head,
        label_set,
        vocabulary,
        method,
    }
}

/// Cached forward pass of one sentence: hidden features plus the window
/// inputs and lookup ids the backward pass scatters into.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Hidden features, `[l, hidden_dim]`.
    pub features: Array2<f64>,
    inputs: Array2<f64>,
    word_ids: Vec<usize>,
    case_ids: Vec<usize>,
}

/// Runs the encoder over a sentence. Out-of-vocabulary tokens use the unk
/// embedding row; positions beyond the edges contribute zero rows.
pub fn encode(state: &ModelState, sentence: &Sentence) -> Forward {
    let dims = state.encoder.dims;
    let l = sentence.len();
    let (de, dc, w) = (dims.word_dim, dims.case_dim, dims.window);
    let word_ids: Vec<usize> = sentence
        .tokens
        .iter()
        .map(|t| state.vocabulary.word_id(t))
        .collect();
    let case_ids: Vec<usize> = sentence
        .tokens
        .iter()
        .map(|t| CasePattern::of(t).id())
        .collect();

    let mut inputs = Array2::zeros((l, dims.input_dim()));
    for i in 0..l {
        for slot in 0..2 * w + 1 {
            let src = i as isize + slot as isize - w as isize;
            if src < 0 || src >= l as isize {
                continue; // zero padding
            }
            let src = src as usize;
            let off = slot * (de + dc);
            inputs
                .slice_mut(s![i, off..off + de])
                .assign(&state.encoder.word_emb.row(word_ids[src]));
            inputs
                .slice_mut(s![i, off + de..off + de + dc])
                .assign(&state.encoder.case_emb.row(case_ids[src]));
        }
    }
    let mut features = inputs.dot(&state.encoder.hidden_w.t());
    features += &state.encoder.hidden_b;
    features.mapv_inplace(f64::tanh);
    Forward {
        features,
        inputs,
        word_ids,
        case_ids,
    }
}

/// Per-token scores of head `k` on encoded features, each strictly in (0,1).
pub fn head_score(state: &ModelState, features: &Array2<f64>, k: usize) -> Vec<f64> {
    let head = &state.heads[k];
    let logits = features.dot(&head.weight);
    logits.iter().map(|&t| sigmoid(t + head.bias)).collect()
}

/// Raw K-way logits of the multiclass head, `[l, K]`.
pub fn multiclass_logits(state: &ModelState, features: &Array2<f64>) -> Result<Array2<f64>> {
    let head = state
        .multiclass_head
        .as_ref()
        .ok_or_else(|| Error::Invalid("model has no multiclass head".into()))?;
    let mut logits = features.dot(&head.weight.t());
    logits += &head.bias;
    Ok(logits)
}

/// `[l, K]` per-token label scores used for prediction, AUC diagnostics and
/// probability export: per-head logistic scores for the OVA methods, softmax
/// probabilities for the multiclass baseline. Column order is label order.
pub fn token_scores(state: &ModelState, sentence: &Sentence) -> Array2<f64> {
    let fwd = encode(state, sentence);
    let k = state.label_set.len();
    if state.method == Method::Ce {
        let mut probs = multiclass_logits(state, &fwd.features)
            .expect("ce model always has a multiclass head");
        for mut row in probs.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                denom += *v;
            }
            row.mapv_inplace(|v| v / denom);
        }
        probs
    } else {
        let mut scores = Array2::zeros((sentence.len(), k));
        for head in 0..k {
            for (i, s) in head_score(state, &fwd.features, head).into_iter().enumerate() {
                scores[[i, head]] = s;
            }
        }
        scores
    }
}

/// Upstream loss gradients entering [`backward`].
#[derive(Debug)]
pub enum Upstream<'a> {
    /// d(loss)/d(score) per touched head: pairs of (head index, per-token
    /// gradients). Heads not listed receive no gradient.
    HeadScores(&'a [(usize, Vec<f64>)]),
    /// d(loss)/d(logit) for the multiclass head, `[l, K]`.
    MulticlassLogits(&'a Array2<f64>),
}

/// Gradient (and velocity) storage mirroring [`ModelState`] shapes. Heads
/// reuse [`HeadParams`]/[`MulticlassHead`] as plain same-shape containers.
#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub word_emb: Array2<f64>,
    pub case_emb: Array2<f64>,
    pub hidden_w: Array2<f64>,
    pub hidden_b: Array1<f64>,
    pub heads: Vec<HeadParams>,
    pub multiclass_head: Option<MulticlassHead>,
}

impl ModelGradients {
    pub fn zeros_like(state: &ModelState) -> ModelGradients {
        ModelGradients {
            word_emb: Array2::zeros(state.encoder.word_emb.dim()),
            case_emb: Array2::zeros(state.encoder.case_emb.dim()),
            hidden_w: Array2::zeros(state.encoder.hidden_w.dim()),
            hidden_b: Array1::zeros(state.encoder.hidden_b.dim()),
            heads: state
                .heads
                .iter()
                .map(|h| HeadParams {
                    weight: Array1::zeros(h.weight.dim()),
                    bias: 0.0,
                })
                .collect(),
            multiclass_head: state.multiclass_head.as_ref().map(|h| MulticlassHead {
                weight: Array2::zeros(h.weight.dim()),
                bias: Array1::zeros(h.bias.dim()),
            }),
        }
    }

    pub fn fill_zero(&mut self) {
        self.word_emb.fill(0.0);
        self.case_emb.fill(0.0);
        self.hidden_w.fill(0.0);
        self.hidden_b.fill(0.0);
        for head in &mut self.heads {
            head.weight.fill(0.0);
            head.bias = 0.0;
        }
        if let Some(mc) = &mut self.multiclass_head {
            mc.weight.fill(0.0);
            mc.bias.fill(0.0);
        }
    }
}

/// Accumulates exact parameter gradients for one sentence into `grads`.
/// Only parameters reached by the forward pass receive contributions;
/// untouched embedding rows stay as they were.
pub fn backward_into(
    state: &ModelState,
    fwd: &Forward,
    upstream: &Upstream,
    grads: &mut ModelGradients,
) -> Result<()> {
    let l = fwd.features.nrows();
    let dims = state.encoder.dims;
    let mut d_features = Array2::zeros((l, dims.hidden_dim));

    match upstream {
        Upstream::HeadScores(per_head) => {
            for (k, d_scores) in per_head.iter() {
                if *k >= state.heads.len() {
                    return Err(Error::Shape(format!(
                        "head index {k} out of range for K={}",
                        state.heads.len()
                    )));
                }
                if d_scores.len() != l {
                    return Err(Error::Shape(format!(
                        "{} upstream score gradients for {l} tokens",
                        d_scores.len()
                    )));
                }
                let head = &state.heads[*k];
                let logits = fwd.features.dot(&head.weight);
                // chain through the logistic: d(loss)/d(logit) = d·s(1−s)
                let g: Array1<f64> = logits
                    .iter()
                    .zip(d_scores)
                    .map(|(&t, &d)| {
                        let s = sigmoid(t + head.bias);
                        d * s * (1.0 - s)
                    })
                    .collect();
                grads.heads[*k].weight += &fwd.features.t().dot(&g);
                grads.heads[*k].bias += g.sum();
                for i in 0..l {
                    d_features.row_mut(i).scaled_add(g[i], &head.weight);
                }
            }
        }
        Upstream::MulticlassLogits(d_logits) => {
            let mc = state
                .multiclass_head
                .as_ref()
                .ok_or_else(|| Error::Invalid("model has no multiclass head".into()))?;
            if d_logits.dim() != (l, state.label_set.len()) {
                return Err(Error::Shape(format!(
                    "upstream logits {:?} vs expected ({l}, {})",
                    d_logits.dim(),
                    state.label_set.len()
                )));
            }
            let mc_grads = grads
                .multiclass_head
                .as_mut()
                .expect("gradients mirror the model");
            mc_grads.weight += &d_logits.t().dot(&fwd.features);
            mc_grads.bias += &d_logits.sum_axis(Axis(0));
            d_features += &d_logits.dot(&mc.weight);
        }
    }

    // through tanh: dz = df ⊙ (1 − f²)
    let mut dz = d_features;
    Zip::from(&mut dz)
        .and(&fwd.features)
        .for_each(|d, &f| *d *= 1.0 - f * f);

    grads.hidden_w += &dz.t().dot(&fwd.inputs);
    grads.hidden_b += &dz.sum_axis(Axis(0));

    // scatter window-input gradients back onto the embedding rows
    let d_inputs = dz.dot(&state.encoder.hidden_w);
    let (de, dc, w) = (dims.word_dim, dims.case_dim, dims.window);
    for i in 0..l {
        for slot in 0..2 * w + 1 {
            let src = i as isize + slot as isize - w as isize;
            if src < 0 || src >= l as isize {
                continue;
            }
            let src = src as usize;
            let off = slot * (de + dc);
            let mut word_row = grads.word_emb.row_mut(fwd.word_ids[src]);
            word_row += &d_inputs.slice(s![i, off..off + de]);
            let mut case_row = grads.case_emb.row_mut(fwd.case_ids[src]);
            case_row += &d_inputs.slice(s![i, off + de..off + de + dc]);
        }
    }
    Ok(())
}

/// Fresh-gradient convenience wrapper around [`backward_into`].
pub fn backward(state: &ModelState, fwd: &Forward, upstream: &Upstream) -> Result<ModelGradients> {
    let mut grads = ModelGradients::zeros_like(state);
    backward_into(state, fwd, upstream, &mut grads)?;
    Ok(grads)
}

const FORMAT_HEADER: &str = "nermodel v1";

fn push_row<'a>(out: &mut String, row: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        // 17 significant digits: exact f64 round-trip, so save → load → save
        // reproduces the file byte for byte.
        write!(out, "{v:.16e}").expect("string write");
        first = false;
    }
    out.push('\n');
}

/// Serializes the model to the versioned `.nermodel` text format.
pub fn save_model(state: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{FORMAT_HEADER}").expect("string write");
    writeln!(out, "method {}", state.method).expect("string write");
    let d = state.encoder.dims;
    writeln!(
        out,
        "dims word_dim {} case_dim {} hidden_dim {} window {}",
        d.word_dim, d.case_dim, d.hidden_dim, d.window
    )
    .expect("string write");
    writeln!(out, "labels {}", state.label_set.len()).expect("string write");
    for label in state.label_set.labels() {
        writeln!(out, "{label}").expect("string write");
    }
    writeln!(
        out,
        "vocab {} min_count {}",
        state.vocabulary.len(),
        state.vocabulary.min_count()
    )
    .expect("string write");
    for word in state.vocabulary.words() {
        writeln!(out, "{word}").expect("string write");
    }
    let enc = &state.encoder;
    writeln!(out, "word_emb {} {}", enc.word_emb.nrows(), enc.word_emb.ncols())
        .expect("string write");
    for row in enc.word_emb.rows() {
        push_row(&mut out, row);
    }
    writeln!(out, "case_emb {} {}", enc.case_emb.nrows(), enc.case_emb.ncols())
        .expect("string write");
    for row in enc.case_emb.rows() {
        push_row(&mut out, row);
    }
    writeln!(out, "hidden_w {} {}", enc.hidden_w.nrows(), enc.hidden_w.ncols())
        .expect("string write");
    for row in enc.hidden_w.rows() {
        push_row(&mut out, row);
    }
    writeln!(out, "hidden_b {}", enc.hidden_b.len()).expect("string write");
    push_row(&mut out, &enc.hidden_b);
    writeln!(out, "heads {}", state.heads.len()).expect("string write");
    for head in &state.heads {
        push_row(&mut out, head.weight.iter().chain(std::iter::once(&head.bias)));
    }
    if let Some(mc) = &state.multiclass_head {
        writeln!(out, "multiclass {} {}", mc.weight.nrows(), mc.weight.ncols())
            .expect("string write");
        for row in mc.weight.rows() {
            push_row(&mut out, row);
        }
        push_row(&mut out, &mc.bias);
    }
    writeln!(out, "end").expect("string write");
    std::fs::write(path, out)?;
    Ok(())
}

/// Sequential reader over the model file with positioned errors.
struct SectionReader<'a> {
    lines: std::str::Lines<'a>,
    path: &'a str,
    lineno: usize,
}

impl<'a> SectionReader<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.lineno += 1;
        self.lines.next().ok_or_else(|| Error::ModelFormat {
            path: self.path.into(),
            msg: format!("truncated at line {}", self.lineno),
        })
    }

    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat {
            path: self.path.into(),
            msg: format!("line {}: {}", self.lineno, msg.into()),
        }
    }

    /// Parses a `name n [n ...]` section header with the expected word count.
    fn header(&mut self, name: &str, count: usize) -> Result<Vec<usize>> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(self.fail(format!("missing `{name}` section, got `{line}`")));
        }
        let nums: Vec<usize> = parts
            .map(|p| {
                p.parse()
                    .map_err(|_| self.fail(format!("bad `{name}` header `{line}`")))
            })
            .collect::<Result<_>>()?;
        if nums.len() != count {
            return Err(self.fail(format!("bad `{name}` header `{line}`")));
        }
        Ok(nums)
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|p| {
                p.parse()
                    .map_err(|_| self.fail(format!("bad float `{p}`")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != expected {
            return Err(self.fail(format!("expected {expected} values, got {}", vals.len())));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((rows, cols));
        for r in 0..rows {
            let vals = self.floats(cols)?;
            for (c, v) in vals.into_iter().enumerate() {
                out[[r, c]] = v;
            }
        }
        Ok(out)
    }
}

/// Reads a `.nermodel` file back; numerically identical to what was saved.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut r = SectionReader {
        lines: text.lines(),
        path: &display,
        lineno: 0,
    };

    let version = r.next()?;
    if version != FORMAT_HEADER {
        return Err(r.fail(format!(
            "unsupported version `{version}`, expected `{FORMAT_HEADER}`"
        )));
    }
    let method_line = r.next()?;
    let method: Method = method_line
        .strip_prefix("method ")
        .ok_or_else(|| r.fail(format!("missing `method`, got `{method_line}`")))?
        .parse()?;
    let dims_line = r.next()?;
    let dim_parts: Vec<&str> = dims_line.split_whitespace().collect();
    let dims = match dim_parts.as_slice() {
        ["dims", "word_dim", de, "case_dim", dc, "hidden_dim", dh, "window", w] => EncoderDims {
            word_dim: de.parse().map_err(|_| r.fail("bad dims"))?,
            case_dim: dc.parse().map_err(|_| r.fail("bad dims"))?,
            hidden_dim: dh.parse().map_err(|_| r.fail("bad dims"))?,
            window: w.parse().map_err(|_| r.fail("bad dims"))?,
        },
        _ => return Err(r.fail(format!("missing `dims`, got `{dims_line}`"))),
    };

    let label_count = r.header("labels", 1)?[0];
    let mut labels = Vec::with_capacity(label_count);
    for _ in 0..label_count {
        labels.push(r.next()?.to_string());
    }
    let label_set = LabelSet::from_labels(labels)?;

    let vocab_line = r.next()?;
    let vocab_parts: Vec<&str> = vocab_line.split_whitespace().collect();
    let (word_count, min_count): (usize, usize) = match vocab_parts.as_slice() {
        ["vocab", n, "min_count", m] => (
            n.parse().map_err(|_| r.fail("bad vocab header"))?,
            m.parse().map_err(|_| r.fail("bad vocab header"))?,
        ),
        _ => return Err(r.fail(format!("missing `vocab` section, got `{vocab_line}`"))),
    };
    let mut words = Vec::with_capacity(word_count);
    for _ in 0..word_count {
        words.push(r.next()?.to_string());
    }
    let vocabulary = Vocabulary::from_words(words, min_count)?;

    let we = r.header("word_emb", 2)?;
    if we[0] != word_count + 1 || we[1] != dims.word_dim {
        return Err(r.fail(format!(
            "word_emb {}x{} inconsistent with vocab {} and word_dim {}",
            we[0],
            we[1],
            word_count,
            dims.word_dim
        )));
    }
    let word_emb = r.matrix(we[0], we[1])?;
    let ce = r.header("case_emb", 2)?;
    if ce[0] != CASE_PATTERNS || ce[1] != dims.case_dim {
        return Err(r.fail("case_emb shape inconsistent with dims"));
    }
    let case_emb = r.matrix(ce[0], ce[1])?;
    let hw = r.header("hidden_w", 2)?;
    if hw[0] != dims.hidden_dim || hw[1] != dims.input_dim() {
        return Err(r.fail("hidden_w shape inconsistent with dims"));
    }
    let hidden_w = r.matrix(hw[0], hw[1])?;
    let hb = r.header("hidden_b", 1)?;
    if hb[0] != dims.hidden_dim {
        return Err(r.fail("hidden_b length inconsistent with dims"));
    }
    let hidden_b = Array1::from_vec(r.floats(hb[0])?);

    let head_count = r.header("heads", 1)?[0];
    if head_count != label_set.len() {
        return Err(r.fail(format!(
            "{head_count} heads do not match {} labels",
            label_set.len()
        )));
    }
    let mut heads = Vec::with_capacity(head_count);
    for _ in 0..head_count {
        let vals = r.floats(dims.hidden_dim + 1)?;
        let (bias, weight) = vals.split_last().expect("nonempty row");
        heads.push(HeadParams {
            weight: Array1::from_vec(weight.to_vec()),
            bias: *bias,
        });
    }

    let trailer = r.next()?;
    let multiclass_head = if let Some(rest) = trailer.strip_prefix("multiclass ") {
        let nums: Vec<usize> = rest
            .split_whitespace()
            .map(|p| p.parse().map_err(|_| r.fail("bad multiclass header")))
            .collect::<Result<_>>()?;
        if nums != [label_set.len(), dims.hidden_dim] {
            return Err(r.fail("multiclass shape inconsistent with labels and dims"));
        }
        let weight = r.matrix(nums[0], nums[1])?;
        let bias = Array1::from_vec(r.floats(nums[0])?);
        let end = r.next()?;
        if end != "end" {
            return Err(r.fail(format!("missing `end`, got `{end}`")));
        }
        Some(MulticlassHead { weight, bias })
    } else if trailer == "end" {
        None
    } else {
        return Err(r.fail(format!("missing `end`, got `{trailer}`")));
    };

    if (method == Method::Ce) != multiclass_head.is_some() {
        return Err(Error::ModelFormat {
            path: display,
            msg: format!("method {method} disagrees with multiclass head presence"),
        });
    }

    Ok(ModelState {
        encoder: EncoderParams {
            word_emb,
            case_emb,
            hidden_w,
            hidden_b,
            dims,
        },
        heads,
        multiclass_head,
        label_set,
        vocabulary,
        method,
    })
}
