use super::grid::{BinaryMask, Grid, ProbMap, RealGrid};
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-r..=r).map(|k| (-((k * k) as f64) / denom).exp()).collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian smoothing with replicated borders and no clamping.
/// `sigma == 0` returns a copy of the input.
pub fn gaussian_smooth(input: &RealGrid, sigma: f64) -> Result<RealGrid> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(input.clone());
    }
    let taps = gaussian_kernel(sigma);
    let r = (taps.len() / 2) as i64;
    let (w, h) = input.dims();
    let src = input.as_slice();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let sx = (x as i64 + i as i64 - r).clamp(0, w as i64 - 1) as usize;
                acc += t * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                let sy = (y as i64 + i as i64 - r).clamp(0, h as i64 - 1) as usize;
                acc += t * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Grid::new(w, h, out)
}

/// Gaussian blur of a probability-like grid, clamped to `[0, 1]`.
pub fn gaussian_blur(input: &RealGrid, sigma: f64) -> Result<ProbMap> {
    Ok(ProbMap::from_grid_clamped(gaussian_smooth(input, sigma)?))
}

/// Foreground where the value is strictly greater than `t`.
pub fn threshold(p: &ProbMap, t: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("threshold", format!("{t} outside [0, 1]")));
    }
    Ok(BinaryMask::from_grid(p.grid().map(|&v| v > t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_sigma_is_identity() {
        let g = Grid::from_fn(5, 4, |x, y| (x * 7 + y * 3) as f64 / 40.0);
        assert_eq!(gaussian_smooth(&g, 0.0).unwrap(), g);
        assert_eq!(gaussian_blur(&g, 0.0).unwrap().grid(), &g);
    }

    #[test]
    fn negative_sigma_rejected() {
        let g = Grid::filled(3, 3, 0.5);
        assert!(gaussian_blur(&g, -0.1).is_err());
        assert!(gaussian_blur(&g, f64::NAN).is_err());
    }

    #[test]
    fn constant_map_is_preserved() {
        let g = Grid::filled(9, 6, 0.37);
        for sigma in [0.5, 1.0, 2.5, 10.0] {
            let b = gaussian_blur(&g, sigma).unwrap();
            for v in b.values() {
                assert!((v - 0.37).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_matches_sampled_gaussian() {
        let g = Grid::from_fn(7, 7, |x, y| if x == 3 && y == 3 { 1.0 } else { 0.0 });
        let out = gaussian_smooth(&g, 1.0).unwrap();
        let mut oracle = vec![0.0; 49];
        let mut total = 0.0;
        for y in 0..7i32 {
            for x in 0..7i32 {
                let d2 = ((x - 3).pow(2) + (y - 3).pow(2)) as f64;
                let v = (-d2 / 2.0).exp();
                oracle[(y * 7 + x) as usize] = v;
                total += v;
            }
        }
        for (a, o) in out.as_slice().iter().zip(&oracle) {
            assert!((a - o / total).abs() < 1e-9, "{a} vs {}", o / total);
        }
    }

    #[test]
    fn threshold_examples() {
        let zeros = ProbMap::uniform(3, 2, 0.0).unwrap();
        assert!(threshold(&zeros, 0.5).unwrap().is_empty());
        let ones = ProbMap::uniform(3, 2, 1.0).unwrap();
        assert_eq!(threshold(&ones, 0.5).unwrap().count(), 6);
        let half = ProbMap::uniform(1, 1, 0.5).unwrap();
        assert!(!threshold(&half, 0.5).unwrap().get(0, 0));
        assert!(threshold(&half, 1.5).is_err());
        assert!(threshold(&half, -0.01).is_err());
    }

    proptest! {
        #[test]
        fn blur_preserves_interior_mass(
            cx in 10usize..22, cy in 10usize..22, sigma in 0.3f64..2.0, amp in 0.1f64..1.0
        ) {
            // Support stays > 3 sigma + 1 away from every edge.
            let g = Grid::from_fn(32, 32, |x, y| {
                if x.abs_diff(cx) <= 2 && y.abs_diff(cy) <= 2 { amp } else { 0.0 }
            });
            let before: f64 = g.as_slice().iter().sum();
            let after: f64 = gaussian_blur(&g, sigma).unwrap().values().iter().sum();
            prop_assert!(((after - before) / before).abs() < 1e-6);
        }

        #[test]
        fn blur_stays_in_unit_interval(
            vals in proptest::collection::vec(0.0f64..=1.0, 64), sigma in 0.0f64..4.0
        ) {
            let g = Grid::new(8, 8, vals).unwrap();
            let b = gaussian_blur(&g, sigma).unwrap();
            prop_assert!(b.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
