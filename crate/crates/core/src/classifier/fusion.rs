//! Forward pass of the three heads and the conditional fusion layer.

use super::model::PixelClassifier;
use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{Grid, PixelFeatures, ProbMap, RealGrid, WeightMap};

#[inline]
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutputs {
    pub fg_estimate: ProbMap,
    pub f1: ProbMap,
    pub f2: ProbMap,
}

pub(crate) fn check_dim(features: &PixelFeatures, params: &PixelClassifier) -> Result<()> {
    if features.dim() != params.dim() {
        return Err(Error::FeatureDimMismatch {
            expected: params.dim(),
            actual: features.dim(),
        });
    }
    Ok(())
}

/// Evaluates all three heads at every pixel.
pub fn classifier_forward(features: &PixelFeatures, params: &PixelClassifier) -> Result<HeadOutputs> {
    check_dim(features, params)?;
    let n = features.pixel_count();
    let h = params.hidden();
    let (mut pre, mut act) = (vec![0.0; h], vec![0.0; h]);
    let (mut fg, mut f1, mut f2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        params.hidden_into(features.pixel(i), &mut pre, &mut act);
        fg.push(logistic(params.head_fg.logit(&act)));
        f1.push(logistic(params.head_f1.logit(&act)));
        f2.push(logistic(params.head_f2.logit(&act)));
    }
    let (w, ht) = features.dims();
    Ok(HeadOutputs {
        fg_estimate: ProbMap::new(w, ht, fg)?,
        f1: ProbMap::new(w, ht, f1)?,
        f2: ProbMap::new(w, ht, f2)?,
    })
}

/// `f_out = w * f1 + (1 - w) * f2`, pixelwise.
pub fn fuse_forward(f1: &ProbMap, f2: &ProbMap, w: &WeightMap) -> Result<ProbMap> {
    ensure_same_dims(f1.dims(), f2.dims())?;
    ensure_same_dims(f1.dims(), w.dims())?;
    let vals: Vec<f64> = f1
        .values()
        .iter()
        .zip(f2.values())
        .zip(w.values())
        .map(|((&a, &b), &w)| w * a + (1.0 - w) * b)
        .collect();
    let (wd, ht) = f1.dims();
    // A convex combination can only leave [0, 1] by rounding.
    Ok(ProbMap::from_grid_clamped(Grid::new(wd, ht, vals)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuseGrads {
    pub g1: RealGrid,
    pub g2: RealGrid,
    /// Gradient with respect to the weight map. Not used for parameter
    /// updates; the prior is an input to the layer.
    pub g_w: RealGrid,
}

/// Routes the upstream gradient to both heads according to the weight map:
/// `g1 = w * g_top`, `g2 = (1 - w) * g_top`, and `g_w = (f1 - f2) * g_top`.
pub fn fuse_backward(g_top: &RealGrid, w: &WeightMap, f1: &ProbMap, f2: &ProbMap) -> Result<FuseGrads> {
    ensure_same_dims(g_top.dims(), w.dims())?;
    ensure_same_dims(g_top.dims(), f1.dims())?;
    ensure_same_dims(g_top.dims(), f2.dims())?;
    let n = g_top.len();
    let (mut g1, mut g2, mut g_w) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let (a, b, c) = fuse_backward_pixel(
            g_top.as_slice()[i],
            w.values()[i],
            f1.values()[i],
            f2.values()[i],
        );
        g1.push(a);
        g2.push(b);
        g_w.push(c);
    }
    let (wd, ht) = g_top.dims();
    Ok(FuseGrads {
        g1: Grid::new(wd, ht, g1)?,
        g2: Grid::new(wd, ht, g2)?,
        g_w: Grid::new(wd, ht, g_w)?,
    })
}

/// Single-pixel form of [`fuse_backward`]: `(g1, g2, g_w)`.
#[inline]
pub fn fuse_backward_pixel(g_top: f64, w: f64, f1: f64, f2: f64) -> (f64, f64, f64) {
    (w * g_top, (1.0 - w) * g_top, (f1 - f2) * g_top)
}

/// One forward pass of the conditional classifier on a frame.
pub fn predict_frame(features: &PixelFeatures, params: &PixelClassifier, w: &WeightMap) -> Result<ProbMap> {
    ensure_same_dims(features.dims(), w.dims())?;
    let heads = classifier_forward(features, params)?;
    fuse_forward(&heads.f1, &heads.f2, w)
}
