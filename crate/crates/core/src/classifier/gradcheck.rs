//! Central-difference check of the analytic gradients.

use super::fusion::{classifier_forward, fuse_forward};
use super::model::PixelClassifier;
use super::train::{loss, loss_and_gradient, TrainFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, PixelFeatures, WeightMap};

/// Denominator floor for the relative error, so that parameters whose true
/// gradient is zero are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index (declaration order) of the worst parameter.
    pub worst_param: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

fn forward_loss(
    params: &PixelClassifier,
    features: &PixelFeatures,
    gt: &BinaryMask,
    w: &WeightMap,
    side_weight: f64,
) -> Result<f64> {
    let heads = classifier_forward(features, params)?;
    let f_out = fuse_forward(&heads.f1, &heads.f2, w)?;
    loss(&f_out, &heads.fg_estimate, gt, side_weight)
}

/// Compares the analytic gradient against central differences of the
/// forward composition on every parameter.
pub fn grad_check_report(
    params: &PixelClassifier,
    features: &PixelFeatures,
    gt: &BinaryMask,
    w: &WeightMap,
    side_weight: f64,
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid("eps", format!("must be finite and > 0, got {eps}")));
    }
    let frame = TrainFrame { features, gt, weight: w };
    let (_, grad) = loss_and_gradient(params, &[frame], side_weight)?;
    let analytic = grad.to_flat();

    let base = params.to_flat();
    let (dim, hidden) = (params.dim(), params.hidden());
    let mut numeric = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for k in 0..base.len() {
        probe[k] = base[k] + eps;
        let up = forward_loss(&PixelClassifier::from_flat(dim, hidden, &probe)?, features, gt, w, side_weight)?;
        probe[k] = base[k] - eps;
        let down = forward_loss(&PixelClassifier::from_flat(dim, hidden, &probe)?, features, gt, w, side_weight)?;
        probe[k] = base[k];
        numeric.push((up - down) / (2.0 * eps));
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_param: 0,
        analytic,
        numeric,
    };
    for (k, (a, n)) in report.analytic.iter().zip(&report.numeric).enumerate() {
        let abs = (a - n).abs();
        let rel = abs / a.abs().max(n.abs()).max(REL_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = k;
        }
    }
    Ok(report)
}

/// Maximum relative discrepancy between analytic and central-difference
/// parameter gradients of `loss(fuse(classifier_forward(..)))`.
pub fn grad_check(
    params: &PixelClassifier,
    features: &PixelFeatures,
    gt: &BinaryMask,
    w: &WeightMap,
    side_weight: f64,
    eps: f64,
) -> Result<f64> {
    Ok(grad_check_report(params, features, gt, w, side_weight, eps)?.max_rel_error)
}

/// Frame size and widths of the seeded instance used by [`grad_check_seeded`].
pub const CHECK_DIMS: (usize, usize) = (4, 4);
pub const CHECK_FEATURES: usize = 6;
pub const CHECK_HIDDEN: usize = 16;

/// Gradient check on a random instance drawn from `seed`: uniform features,
/// labels and weights on a 4x4 frame, `init`-distributed parameters, side
/// weight 1.
pub fn grad_check_seeded(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = CHECK_DIMS;
    let n = w * h;
    let d = CHECK_FEATURES;
    let features = PixelFeatures::new(w, h, d, (0..n * d).map(|_| rng.random::<f64>()).collect())?;
    let gt = BinaryMask::new(w, h, (0..n).map(|_| rng.random::<bool>()).collect())?;
    let weight = WeightMap::new(w, h, (0..n).map(|_| rng.random::<f64>()).collect())?;
    let params = PixelClassifier::init(d, CHECK_HIDDEN, rng.random());
    grad_check_report(&params, &features, &gt, &weight, 1.0, eps)
}
