use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{boundary, squared_distance_transform, BinaryMask};

/// Mean, recall and decay of a per-frame quality series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub recall: f64,
    pub decay: f64,
}

/// Frames scoring strictly above this count towards recall.
pub const RECALL_THRESHOLD: f64 = 0.5;

/// Mean, fraction of frames above 0.5, and the mean of the first quarter of
/// frames minus the mean of the last quarter (`floor(N/4)` frames, at least 1).
pub fn j_summary(per_frame: &[f64]) -> Result<MetricSummary> {
    let n = per_frame.len();
    if n < 4 {
        return Err(Error::TooFewFrames {
            required: 4,
            actual: n,
        });
    }
    let mean = per_frame.iter().sum::<f64>() / n as f64;
    let recall = per_frame.iter().filter(|&&v| v > RECALL_THRESHOLD).count() as f64 / n as f64;
    let q = (n / 4).max(1);
    let head = per_frame[..q].iter().sum::<f64>() / q as f64;
    let tail = per_frame[n - q..].iter().sum::<f64>() / q as f64;
    Ok(MetricSummary {
        mean,
        recall,
        decay: head - tail,
    })
}

/// Region similarity of one frame (IoU; empty vs. empty scores 1).
pub fn region_similarity(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    crate::mask::iou(pred, gt)
}

/// Boundary tolerance used when none is given: 0.8% of the image diagonal,
/// rounded up, at least one pixel.
pub fn default_f_tolerance(width: usize, height: usize) -> f64 {
    let diag = ((width * width + height * height) as f64).sqrt();
    (0.008 * diag).ceil().max(1.0)
}

/// Contour accuracy: harmonic mean of boundary precision and recall, where
/// a boundary pixel matches if the other boundary lies within `tol` pixels.
pub fn f_measure(pred: &BinaryMask, gt: &BinaryMask, tol: f64) -> Result<f64> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol", format!("must be >= 0, got {tol}")));
    }
    let pb = boundary(pred);
    let gb = boundary(gt);
    let (np, ng) = (pb.count(), gb.count());
    if np == 0 && ng == 0 {
        return Ok(1.0);
    }
    let matched = |from: &BinaryMask, to: &BinaryMask| -> usize {
        let d2 = squared_distance_transform(to);
        from.bits()
            .iter()
            .zip(d2.as_slice())
            .filter(|(&b, &d)| b && d.sqrt() <= tol)
            .count()
    };
    let precision = if np == 0 { 0.0 } else { matched(&pb, &gb) as f64 / np as f64 };
    let recall = if ng == 0 { 0.0 } else { matched(&gb, &pb) as f64 / ng as f64 };
    Ok(harmonic(precision, recall))
}

#[inline]
pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
