//! Edge-preserving smoothing of the fused probability map and the final
//! binarization.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{threshold, BinaryMask, Grid, ProbMap, RealGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilateralConfig {
    pub sigma_spatial: f64,
    pub sigma_range: f64,
    pub window_radius: usize,
}

impl Default for BilateralConfig {
    fn default() -> Self {
        BilateralConfig {
            sigma_spatial: 8.0,
            sigma_range: 0.1,
            window_radius: 16,
        }
    }
}

impl BilateralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_spatial > 0.0) || !self.sigma_spatial.is_finite() {
            return Err(Error::invalid("sigma_spatial", "must be finite and > 0"));
        }
        if !(self.sigma_range > 0.0) {
            return Err(Error::invalid("sigma_range", "must be > 0"));
        }
        let min_radius = (2.0 * self.sigma_spatial).ceil() as usize;
        if self.window_radius < min_radius {
            return Err(Error::invalid(
                "window_radius",
                format!("{} is below ceil(2 * sigma_spatial) = {min_radius}", self.window_radius),
            ));
        }
        Ok(())
    }
}

/// Joint bilateral filter of `p` guided by `guide`.
///
/// Each output pixel is the normalized sum over the `(2r+1)^2` window of
/// `p[q] * exp(-|q - c|^2 / 2 sigma_s^2) * exp(-(guide[q] - guide[c])^2 / 2 sigma_r^2)`.
/// Window taps falling outside the image read the nearest border pixel, so
/// with a constant guide and `r = ceil(3 sigma_s)` this is exactly
/// [`crate::mask::gaussian_blur`].
pub fn bilateral_filter(p: &ProbMap, guide: &RealGrid, cfg: &BilateralConfig) -> Result<ProbMap> {
    cfg.validate()?;
    ensure_same_dims(p.dims(), guide.dims())?;
    let (w, h) = p.dims();
    let r = cfg.window_radius as i64;
    let side = 2 * r as usize + 1;
    let s2 = 2.0 * cfg.sigma_spatial * cfg.sigma_spatial;
    let r2 = 2.0 * cfg.sigma_range * cfg.sigma_range;

    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            spatial.push((-((dx * dx + dy * dy) as f64) / s2).exp());
        }
    }

    let src = p.values();
    let g = guide.as_slice();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let gc = g[(y as usize) * w + x as usize];
            let (mut num, mut den) = (0.0, 0.0);
            let mut k = 0;
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h as i64 - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as i64 - 1) as usize;
                    let q = sy * w + sx;
                    let diff = g[q] - gc;
                    let wt = spatial[k] * (-(diff * diff) / r2).exp();
                    num += wt * src[q];
                    den += wt;
                    k += 1;
                }
            }
            out.push(num / den);
        }
    }
    Ok(ProbMap::from_grid_clamped(Grid::new(w, h, out)?))
}

/// Default decision threshold for [`finalize`].
pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn finalize(p: &ProbMap, t: f64) -> Result<BinaryMask> {
    threshold(p, t)
}
