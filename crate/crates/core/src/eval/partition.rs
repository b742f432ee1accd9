use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{boundary, squared_distance_transform, BinaryMask};

/// Raw pixel counts behind an [`ErrorPartition`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub fp_close: u64,
    pub fp_far: u64,
    pub false_negative: u64,
    pub true_positive: u64,
    pub true_negative: u64,
    pub total: u64,
}

impl PixelCounts {
    pub fn categorized(&self) -> u64 {
        self.fp_close + self.fp_far + self.false_negative + self.true_positive + self.true_negative
    }
}

/// Misclassified pixels of a sequence as percentages of all its pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPartition {
    pub fp_close_pct: f64,
    pub fp_far_pct: f64,
    pub fn_pct: f64,
    pub counts: PixelCounts,
}

impl ErrorPartition {
    pub fn tp_pct(&self) -> f64 {
        pct(self.counts.true_positive, self.counts.total)
    }

    pub fn tn_pct(&self) -> f64 {
        pct(self.counts.true_negative, self.counts.total)
    }
}

fn pct(n: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

/// False positives within this many pixels of the gt boundary count as close:
/// 2% of the image diagonal.
pub fn default_d_close(width: usize, height: usize) -> f64 {
    0.02 * ((width * width + height * height) as f64).sqrt()
}

pub fn error_partition(preds: &[BinaryMask], gts: &[BinaryMask], d_close: f64) -> Result<ErrorPartition> {
    if preds.len() != gts.len() {
        return Err(Error::invalid(
            "preds",
            format!("{} predictions for {} ground-truth frames", preds.len(), gts.len()),
        ));
    }
    if !(d_close >= 0.0) {
        return Err(Error::invalid("d_close", format!("must be >= 0, got {d_close}")));
    }
    let mut c = PixelCounts::default();
    for (pred, gt) in preds.iter().zip(gts) {
        ensure_same_dims(gt.dims(), pred.dims())?;
        let d2 = squared_distance_transform(&boundary(gt));
        for ((&p, &g), &d) in pred.bits().iter().zip(gt.bits()).zip(d2.as_slice()) {
            match (p, g) {
                (true, true) => c.true_positive += 1,
                (false, false) => c.true_negative += 1,
                (false, true) => c.false_negative += 1,
                (true, false) if d.sqrt() <= d_close => c.fp_close += 1,
                (true, false) => c.fp_far += 1,
            }
        }
        c.total += (pred.width() * pred.height()) as u64;
    }
    Ok(ErrorPartition {
        fp_close_pct: pct(c.fp_close, c.total),
        fp_far_pct: pct(c.fp_far, c.total),
        fn_pct: pct(c.false_negative, c.total),
        counts: c,
    })
}
