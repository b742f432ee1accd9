use super::report::SequenceResult;
use crate::error::{Error, Result};

/// Number of points on the normalized decay curve (0, 1, ..., 100 percent).
pub const DECAY_POINTS: usize = 101;

/// Piecewise-linear interpolation of a per-frame series at `percent` of the
/// sequence length, frame `i` sitting at `100 i / (N - 1)`.
pub fn resample_at(per_frame: &[f64], percent: f64) -> Result<f64> {
    let n = per_frame.len();
    if n < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            actual: n,
        });
    }
    let x = (percent / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    let t = x - i as f64;
    Ok((1.0 - t) * per_frame[i] + t * per_frame[i + 1])
}

/// Mean J over sequences as a function of normalized position, sampled at
/// every integer percent.
pub fn decay_curve(results: &[SequenceResult]) -> Result<Vec<f64>> {
    if results.is_empty() {
        return Err(Error::EmptyInput("decay curve needs at least one sequence"));
    }
    let mut curve = vec![0.0; DECAY_POINTS];
    for r in results {
        for (p, c) in curve.iter_mut().enumerate() {
            *c += resample_at(&r.per_frame_j, p as f64)?;
        }
    }
    let n = results.len() as f64;
    for c in &mut curve {
        *c /= n;
    }
    Ok(curve)
}
