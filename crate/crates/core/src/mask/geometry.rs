//! Region overlap, boundaries and exact Euclidean distance transforms.

use super::grid::{neighbours4, BinaryMask, Grid, RealGrid};
use crate::error::{ensure_same_dims, Result};

/// Intersection over union. Two empty masks score 1.0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits().iter().zip(b.bits()) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Foreground pixels with at least one 4-neighbour that is background or
/// outside the grid.
pub fn boundary(m: &BinaryMask) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        if !m.get(x, y) {
            return false;
        }
        if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            return true;
        }
        neighbours4(x, y, w, h).any(|(nx, ny)| !m.get(nx, ny))
    })
}

// Large enough to dominate any squared distance on a realistic grid, small
// enough that adding squared offsets to it stays finite.
const FAR: f64 = 1e20;

/// Squared Euclidean distance from every pixel to the nearest foreground
/// pixel of `m`. Values are exact integers; an empty mask yields `+inf`
/// everywhere.
pub fn squared_distance_transform(m: &BinaryMask) -> RealGrid {
    let (w, h) = m.dims();
    if m.is_empty() {
        return Grid::filled(w, h, f64::INFINITY);
    }
    let mut out: Vec<f64> = m.bits().iter().map(|&b| if b { 0.0 } else { FAR }).collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    // Columns.
    for x in 0..w {
        for y in 0..h {
            f[y] = out[y * w + x];
        }
        lower_envelope(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            out[y * w + x] = d[y];
        }
    }
    // Rows.
    for y in 0..h {
        let row = &mut out[y * w..(y + 1) * w];
        f[..w].copy_from_slice(row);
        lower_envelope(&f[..w], &mut d[..w], &mut v, &mut z);
        row.copy_from_slice(&d[..w]);
    }
    for v in &mut out {
        if *v >= FAR {
            *v = f64::INFINITY;
        }
    }
    Grid::new(w, h, out).expect("dims preserved")
}

/// Euclidean distance to the nearest foreground pixel; `+inf` everywhere
/// when the mask is empty.
pub fn distance_transform(m: &BinaryMask) -> RealGrid {
    squared_distance_transform(m).map(|d| d.sqrt())
}

/// One-dimensional squared-distance transform of a sampled function: lower
/// envelope of the parabolas rooted at each sample.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(f, q, v[k]);
        // z[0] is -inf, so this never underflows k.
        while s <= z[k] {
            k -= 1;
            s = intersect(f, q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let off = q as f64 - v[k] as f64;
        *dq = off * off + f[v[k]];
    }
}

/// Abscissa where the parabolas rooted at `q` and `p` intersect.
#[inline]
fn intersect(f: &[f64], q: usize, p: usize) -> f64 {
    let (qf, pf) = (q as f64, p as f64);
    ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
}
