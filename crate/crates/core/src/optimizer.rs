//! Stochastic primal-dual updates: momentum SGD on the model parameters,
//! plain projected steps on the per-head dual variables, with a shared
//! per-epoch multiplicative learning-rate decay.

use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::losses::HeadDualState;
use crate::model::{ModelGradients, ModelState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr_primal: f64,
    pub lr_dual: f64,
    /// Multiplied into both learning rates once per epoch.
    pub lr_decay: f64,
    /// Momentum on primal parameters only; the max-player stays plain so the
    /// saddle-point iteration does not overshoot.
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> OptimizerConfig {
        OptimizerConfig {
            lr_primal: 0.05,
            lr_dual: 0.05,
            lr_decay: 0.98,
            momentum: 0.9,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_primal > 0.0 && self.lr_primal.is_finite()) {
            return Err(Error::Config("lr_primal must be positive".into()));
        }
        if !(self.lr_dual > 0.0 && self.lr_dual.is_finite()) {
            return Err(Error::Config("lr_dual must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Effective primal rate after `epoch` epochs: lr_primal · decay^epoch.
    pub fn primal_lr_at(&self, epoch: usize) -> f64 {
        self.lr_primal * self.lr_decay.powi(epoch as i32)
    }

    /// Effective dual rate after `epoch` epochs: lr_dual · decay^epoch.
    pub fn dual_lr_at(&self, epoch: usize) -> f64 {
        self.lr_dual * self.lr_decay.powi(epoch as i32)
    }
}

fn check_finite<'a>(name: &str, vals: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if vals.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

/// velocity ← momentum·velocity + grads; params ← params − lr·velocity
fn sgd<D: Dimension>(
    params: &mut Array<f64, D>,
    grads: &Array<f64, D>,
    velocity: &mut Array<f64, D>,
    lr: f64,
    momentum: f64,
) {
    Zip::from(&mut *velocity)
        .and(grads)
        .for_each(|v, &g| *v = momentum * *v + g);
    params.scaled_add(-lr, velocity);
}

/// One momentum-SGD step over every parameter group at the epoch's decayed
/// rate. Errors (before touching anything) if any gradient is non-finite,
/// naming the offending group.
pub fn step_primal(
    state: &mut ModelState,
    grads: &ModelGradients,
    velocity: &mut ModelGradients,
    cfg: &OptimizerConfig,
    epoch: usize,
) -> Result<()> {
    check_finite("word_emb", &grads.word_emb)?;
    check_finite("case_emb", &grads.case_emb)?;
    check_finite("hidden_w", &grads.hidden_w)?;
    check_finite("hidden_b", &grads.hidden_b)?;
    for (k, head) in grads.heads.iter().enumerate() {
        check_finite(
            &format!("head {k}"),
            head.weight.iter().chain(std::iter::once(&head.bias)),
        )?;
    }
    if let Some(mc) = &grads.multiclass_head {
        check_finite("multiclass_head", mc.weight.iter().chain(mc.bias.iter()))?;
    }

    let lr = cfg.primal_lr_at(epoch);
    let m = cfg.momentum;
    sgd(&mut state.encoder.word_emb, &grads.word_emb, &mut velocity.word_emb, lr, m);
    sgd(&mut state.encoder.case_emb, &grads.case_emb, &mut velocity.case_emb, lr, m);
    sgd(&mut state.encoder.hidden_w, &grads.hidden_w, &mut velocity.hidden_w, lr, m);
    sgd(&mut state.encoder.hidden_b, &grads.hidden_b, &mut velocity.hidden_b, lr, m);
    for ((head, g), v) in state
        .heads
        .iter_mut()
        .zip(&grads.heads)
        .zip(&mut velocity.heads)
    {
        sgd(&mut head.weight, &g.weight, &mut v.weight, lr, m);
        v.bias = m * v.bias + g.bias;
        head.bias -= lr * v.bias;
    }
    if let Some(mc) = &mut state.multiclass_head {
        let g = grads.multiclass_head.as_ref().expect("mirrored gradients");
        let v = velocity.multiclass_head.as_mut().expect("mirrored velocity");
        sgd(&mut mc.weight, &g.weight, &mut v.weight, lr, m);
        sgd(&mut mc.bias, &g.bias, &mut v.bias, lr, m);
    }
    Ok(())
}

/// Descends a and b, ascends α with projection back onto [0, ∞), at the
/// epoch's decayed dual rate.
pub fn step_dual(
    dual: &mut HeadDualState,
    d_a: f64,
    d_b: f64,
    d_alpha: f64,
    cfg: &OptimizerConfig,
    epoch: usize,
) -> Result<()> {
    if !(d_a.is_finite() && d_b.is_finite() && d_alpha.is_finite()) {
        return Err(Error::NonFinite("dual variables".into()));
    }
    let lr = cfg.dual_lr_at(epoch);
    dual.a -= lr * d_a;
    dual.b -= lr * d_b;
    dual.alpha = (dual.alpha + lr * d_alpha).max(0.0);
    Ok(())
}
