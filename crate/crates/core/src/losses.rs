//! Training objectives: the margin-based AUC minimax surrogate with its
//! auxiliary/dual variables, plus binary and multiclass cross-entropy
//! baselines. Every loss returns exact analytic gradients for all of its
//! arguments.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The four training strategies. The strings are the config-file spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ce,
    OvaBce,
    OvaAuc,
    OvaAucMaml,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ce, Method::OvaBce, Method::OvaAuc, Method::OvaAucMaml];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ce => "ce",
            Method::OvaBce => "ova-bce",
            Method::OvaAuc => "ova-auc",
            Method::OvaAucMaml => "ova-auc-maml",
        }
    }

    /// Whether the strategy trains per-head AUC dual variables.
    pub fn uses_duals(self) -> bool {
        matches!(self, Method::OvaAuc | Method::OvaAucMaml)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Per-head state of the AUC surrogate: auxiliary score centers `a`
/// (positive) and `b` (negative), the dual `alpha` kept ≥ 0 by projection,
/// the margin, and the positive-class prior `p` of this head in the
/// training pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadDualState {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub margin: f64,
    pub p: f64,
}

impl HeadDualState {
    /// Zero-initialized state; `p` is clamped into [1e-6, 1 − 1e-6] so the
    /// prior weights never vanish for heads with no (or all) positives.
    pub fn new(margin: f64, p: f64) -> HeadDualState {
        assert!(margin > 0.0, "margin must be positive");
        HeadDualState {
            a: 0.0,
            b: 0.0,
            alpha: 0.0,
            margin,
            p: p.clamp(1e-6, 1.0 - 1e-6),
        }
    }
}

/// Value and gradients of [`auc_margin_loss`].
#[derive(Debug, Clone)]
pub struct AucGrads {
    pub loss: f64,
    pub d_scores: Vec<f64>,
    pub d_a: f64,
    pub d_b: f64,
    pub d_alpha: f64,
}

/// Prior-weighted minibatch estimator of the margin AUC surrogate:
///
/// ```text
/// L = (1/n) Σ_i (1−p)(h_i−a)² [z_i=+1]  +  (1/n) Σ_i p(h_i−b)² [z_i=−1]
///   + 2α( p(1−p)m + (1/n) Σ_i ( p·h_i·[z_i=−1] − (1−p)·h_i·[z_i=+1] ) )
///   − p(1−p)α²
/// ```
///
/// Minimizing over (a, b) and ascending in α drives a → mean positive score,
/// b → mean negative score, α → max(0, m − a + b); see
/// [`dual_optima`]. Batches with only one class are fine — the absent
/// class's terms vanish.
pub fn auc_margin_loss(scores: &[f64], labels: &[i8], dual: &HeadDualState) -> Result<AucGrads> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::Invalid("empty batch".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{n} scores vs {} labels",
            labels.len()
        )));
    }
    let HeadDualState {
        a,
        b,
        alpha,
        margin,
        p,
    } = *dual;
    let inv_n = 1.0 / n as f64;

    let mut sq_pos = 0.0; // Σ₊ (h−a)²
    let mut sq_neg = 0.0; // Σ₋ (h−b)²
    let mut dev_pos = 0.0; // Σ₊ (h−a)
    let mut dev_neg = 0.0; // Σ₋ (h−b)
    let mut cross = 0.0; // Σ p·h·[−] − (1−p)·h·[+]
    let mut d_scores = vec![0.0; n];
    for (i, (&h, &z)) in scores.iter().zip(labels).enumerate() {
        match z {
            1 => {
                sq_pos += (h - a) * (h - a);
                dev_pos += h - a;
                cross -= (1.0 - p) * h;
                d_scores[i] = 2.0 * (1.0 - p) * inv_n * ((h - a) - alpha);
            }
            -1 => {
                sq_neg += (h - b) * (h - b);
                dev_neg += h - b;
                cross += p * h;
                d_scores[i] = 2.0 * p * inv_n * ((h - b) + alpha);
            }
            other => {
                return Err(Error::Invalid(format!(
                    "binary label must be +1 or -1, got {other}"
                )))
            }
        }
    }

    let ascent_term = p * (1.0 - p) * margin + cross * inv_n;
    let loss = (1.0 - p) * inv_n * sq_pos + p * inv_n * sq_neg + 2.0 * alpha * ascent_term
        - p * (1.0 - p) * alpha * alpha;
    Ok(AucGrads {
        loss,
        d_scores,
        d_a: -2.0 * (1.0 - p) * inv_n * dev_pos,
        d_b: -2.0 * p * inv_n * dev_neg,
        d_alpha: 2.0 * ascent_term - 2.0 * p * (1.0 - p) * alpha,
    })
}

/// Closed-form stationary point of the surrogate's auxiliary and dual
/// variables at fixed scores: a* = positive mean, b* = negative mean,
/// α* = max(0, m − a* + b*).
pub fn dual_optima(pos_mean: f64, neg_mean: f64, margin: f64) -> (f64, f64, f64) {
    (
        pos_mean,
        neg_mean,
        (margin - pos_mean + neg_mean).max(0.0),
    )
}

/// Mean binary cross entropy over ±1 labels with its score gradient.
pub fn bce_loss(scores: &[f64], labels: &[i8]) -> Result<(f64, Vec<f64>)> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::Invalid("empty batch".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{n} scores vs {} labels",
            labels.len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut d_scores = vec![0.0; n];
    for (i, (&h, &z)) in scores.iter().zip(labels).enumerate() {
        match z {
            1 => {
                loss -= inv_n * h.ln();
                d_scores[i] = -inv_n / h;
            }
            -1 => {
                loss -= inv_n * (1.0 - h).ln();
                d_scores[i] = inv_n / (1.0 - h);
            }
            other => {
                return Err(Error::Invalid(format!(
                    "binary label must be +1 or -1, got {other}"
                )))
            }
        }
    }
    Ok((loss, d_scores))
}

/// Mean softmax cross entropy over `[n, K]` logits; gradient is
/// (softmax − onehot)/n.
pub fn ce_loss(logits: &Array2<f64>, label_indices: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (n, k) = logits.dim();
    if n == 0 {
        return Err(Error::Invalid("empty batch".into()));
    }
    if label_indices.len() != n {
        return Err(Error::Shape(format!(
            "{n} logit rows vs {} labels",
            label_indices.len()
        )));
    }
    if let Some(&bad) = label_indices.iter().find(|&&y| y >= k) {
        return Err(Error::Invalid(format!(
            "label index {bad} out of range for K={k}"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = logits.clone();
    for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            denom += *v;
        }
        // row now holds softmax probabilities
        row.mapv_inplace(|v| v / denom);
        loss -= inv_n * row[label_indices[i]].ln();
        row.mapv_inplace(|v| v * inv_n);
        row[label_indices[i]] -= inv_n;
    }
    Ok((loss, grad))
}
