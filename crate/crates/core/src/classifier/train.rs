//! Loss, hand-derived gradients and full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::fusion::{check_dim, fuse_backward_pixel, logistic};
use super::model::PixelClassifier;
use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{BinaryMask, PixelFeatures, ProbMap, WeightMap};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
fn bce(p: f64, y: bool) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of [`bce`] with respect to the unclamped probability; zero
/// where the clamp is active.
#[inline]
fn bce_grad(p: f64, y: bool) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return 0.0;
    }
    if y {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// Mean binary cross-entropy of the fused output plus `side_weight` times
/// the mean binary cross-entropy of the first-round estimate.
pub fn loss(f_out: &ProbMap, fg_estimate: &ProbMap, gt: &BinaryMask, side_weight: f64) -> Result<f64> {
    ensure_same_dims(f_out.dims(), gt.dims())?;
    ensure_same_dims(fg_estimate.dims(), gt.dims())?;
    let n = gt.bits().len() as f64;
    let (mut main, mut side) = (0.0, 0.0);
    for ((&f, &e), &y) in f_out.values().iter().zip(fg_estimate.values()).zip(gt.bits()) {
        main += bce(f, y);
        side += bce(e, y);
    }
    Ok(main / n + side_weight * side / n)
}

/// One supervised frame.
#[derive(Clone, Copy, Debug)]
pub struct TrainFrame<'a> {
    pub features: &'a PixelFeatures,
    pub gt: &'a BinaryMask,
    pub weight: &'a WeightMap,
}

impl TrainFrame<'_> {
    fn validate(&self, params: &PixelClassifier) -> Result<()> {
        check_dim(self.features, params)?;
        ensure_same_dims(self.features.dims(), self.gt.dims())?;
        ensure_same_dims(self.features.dims(), self.weight.dims())
    }
}

/// Loss over all pixels of all frames and its gradient with respect to
/// every classifier parameter. The weight maps are held fixed.
pub fn loss_and_gradient(
    params: &PixelClassifier,
    frames: &[TrainFrame<'_>],
    side_weight: f64,
) -> Result<(f64, PixelClassifier)> {
    for f in frames {
        f.validate(params)?;
    }
    let total: usize = frames.iter().map(|f| f.features.pixel_count()).sum();
    if total == 0 {
        return Err(Error::EmptyInput("training frames"));
    }
    let inv_n = 1.0 / total as f64;
    let h = params.hidden();
    let mut grad = PixelClassifier::zeros(params.dim(), h);
    let (mut pre, mut act, mut dz) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    let (mut main, mut side) = (0.0, 0.0);

    for frame in frames {
        let feats = frame.features;
        for i in 0..feats.pixel_count() {
            let x = feats.pixel(i);
            let y = frame.gt.bits()[i];
            let w = frame.weight.values()[i];
            params.hidden_into(x, &mut pre, &mut act);
            let fg = logistic(params.head_fg.logit(&act));
            let f1 = logistic(params.head_f1.logit(&act));
            let f2 = logistic(params.head_f2.logit(&act));
            let f_out = w * f1 + (1.0 - w) * f2;
            main += bce(f_out, y);
            side += bce(fg, y);

            let g_top = bce_grad(f_out, y) * inv_n;
            let (g1, g2, _) = fuse_backward_pixel(g_top, w, f1, f2);
            let d1 = g1 * f1 * (1.0 - f1);
            let d2 = g2 * f2 * (1.0 - f2);
            let dfg = side_weight * bce_grad(fg, y) * inv_n * fg * (1.0 - fg);

            for (g, d) in [
                (&mut grad.head_fg, dfg),
                (&mut grad.head_f1, d1),
                (&mut grad.head_f2, d2),
            ] {
                if d == 0.0 {
                    continue;
                }
                g.bias += d;
                for (gw, a) in g.weights.iter_mut().zip(&act) {
                    *gw += d * a;
                }
            }
            for j in 0..h {
                dz[j] = if pre[j] > 0.0 {
                    dfg * params.head_fg.weights[j]
                        + d1 * params.head_f1.weights[j]
                        + d2 * params.head_f2.weights[j]
                } else {
                    0.0
                };
                grad.shared_bias[j] += dz[j];
            }
            for (k, &xk) in x.iter().enumerate() {
                let row = &mut grad.shared_weights[k * h..(k + 1) * h];
                for (g, d) in row.iter_mut().zip(&dz) {
                    *g += xk * d;
                }
            }
        }
    }
    Ok((main * inv_n + side_weight * side * inv_n, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Pretrain,
    Finetune,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub pretrain_steps: usize,
    pub finetune_steps: usize,
    pub side_loss_weight: f64,
    pub seed: u64,
    pub hidden_units: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            pretrain_steps: 100,
            finetune_steps: 200,
            side_loss_weight: 1.0,
            seed: 0,
            hidden_units: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate", "must be finite and > 0"));
        }
        if !(self.side_loss_weight >= 0.0) || !self.side_loss_weight.is_finite() {
            return Err(Error::invalid("side_loss_weight", "must be finite and >= 0"));
        }
        if self.hidden_units == 0 {
            return Err(Error::invalid("hidden_units", "must be >= 1"));
        }
        Ok(())
    }

    pub fn steps(&self, stage: Stage) -> usize {
        match stage {
            Stage::Pretrain => self.pretrain_steps,
            Stage::Finetune => self.finetune_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: PixelClassifier,
    /// Loss before each update, followed by the loss of the returned
    /// parameters; `steps + 1` entries.
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent on the combined loss. Deterministic: the only
/// randomness is in `init`.
pub fn train(
    frames: &[TrainFrame<'_>],
    cfg: &TrainConfig,
    stage: Stage,
    init: &PixelClassifier,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::EmptyInput("training frames"));
    }
    let steps = cfg.steps(stage);
    let mut params = init.clone();
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let (l, grad) = loss_and_gradient(&params, frames, cfg.side_loss_weight)?;
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        losses.push(l);
        if step == steps {
            break;
        }
        params.add_scaled(&grad, -cfg.learning_rate);
        if !params.is_finite() {
            return Err(Error::NonFiniteLoss { step: step + 1 });
        }
    }
    Ok(TrainOutcome { params, losses })
}
