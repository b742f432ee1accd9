use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Scalar logistic head over the shared hidden activations.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Head {
    fn zeros(hidden: usize) -> Self {
        Head {
            weights: vec![0.0; hidden],
            bias: 0.0,
        }
    }

    #[inline]
    pub(crate) fn logit(&self, act: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(act).map(|(w, a)| w * a).sum::<f64>()
    }
}

/// Per-pixel appearance model: one shared ReLU layer feeding three logistic
/// heads. `head_fg` is the first-round foreground estimator; `head_f1` and
/// `head_f2` are the foreground- and background-conditioned classifiers.
///
/// The same struct doubles as a gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelClassifier {
    dim: usize,
    hidden: usize,
    /// `dim x hidden`, row-major: `shared_weights[i * hidden + j]` connects
    /// input `i` to hidden unit `j`.
    pub shared_weights: Vec<f64>,
    pub shared_bias: Vec<f64>,
    pub head_fg: Head,
    pub head_f1: Head,
    pub head_f2: Head,
}

/// Which of the three heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    Foreground,
    F1,
    F2,
}

impl PixelClassifier {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        assert!(dim > 0 && hidden > 0, "dim and hidden must be positive");
        PixelClassifier {
            dim,
            hidden,
            shared_weights: vec![0.0; dim * hidden],
            shared_bias: vec![0.0; hidden],
            head_fg: Head::zeros(hidden),
            head_f1: Head::zeros(hidden),
            head_f2: Head::zeros(hidden),
        }
    }

    /// He-normal shared layer, `N(0, 1/h)` heads, zero biases.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut p = Self::zeros(dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared = Normal::new(0.0, (2.0 / dim as f64).sqrt()).expect("valid std");
        for w in &mut p.shared_weights {
            *w = shared.sample(&mut rng);
        }
        let head = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid std");
        for h in [&mut p.head_fg, &mut p.head_f1, &mut p.head_f2] {
            for w in &mut h.weights {
                *w = head.sample(&mut rng);
            }
        }
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn head(&self, kind: HeadKind) -> &Head {
        match kind {
            HeadKind::Foreground => &self.head_fg,
            HeadKind::F1 => &self.head_f1,
            HeadKind::F2 => &self.head_f2,
        }
    }

    pub fn param_count(&self) -> usize {
        self.dim * self.hidden + self.hidden + 3 * (self.hidden + 1)
    }

    /// All parameters in declaration order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.shared_weights);
        v.extend_from_slice(&self.shared_bias);
        for h in [&self.head_fg, &self.head_f1, &self.head_f2] {
            v.extend_from_slice(&h.weights);
            v.push(h.bias);
        }
        v
    }

    pub fn from_flat(dim: usize, hidden: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(dim, hidden);
        if flat.len() != p.param_count() {
            return Err(Error::invalid(
                "params",
                format!("expected {} values, got {}", p.param_count(), flat.len()),
            ));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("params", "non-finite parameter"));
        }
        let (sw, rest) = flat.split_at(dim * hidden);
        p.shared_weights.copy_from_slice(sw);
        let (sb, mut rest) = rest.split_at(hidden);
        p.shared_bias.copy_from_slice(sb);
        for h in [&mut p.head_fg, &mut p.head_f1, &mut p.head_f2] {
            let (hw, r) = rest.split_at(hidden);
            h.weights.copy_from_slice(hw);
            h.bias = r[0];
            rest = &r[1..];
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`, parameter-wise.
    pub(crate) fn add_scaled(&mut self, other: &PixelClassifier, scale: f64) {
        debug_assert_eq!((self.dim, self.hidden), (other.dim, other.hidden));
        let pairs = [
            (&mut self.shared_weights, &other.shared_weights),
            (&mut self.shared_bias, &other.shared_bias),
            (&mut self.head_fg.weights, &other.head_fg.weights),
            (&mut self.head_f1.weights, &other.head_f1.weights),
            (&mut self.head_f2.weights, &other.head_f2.weights),
        ];
        for (dst, src) in pairs {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
        self.head_fg.bias += scale * other.head_fg.bias;
        self.head_f1.bias += scale * other.head_f1.bias;
        self.head_f2.bias += scale * other.head_f2.bias;
    }

    /// Shared ReLU activations for one feature vector; pre-activations are
    /// written to `pre`, activations to `act`.
    #[inline]
    pub(crate) fn hidden_into(&self, x: &[f64], pre: &mut [f64], act: &mut [f64]) {
        let h = self.hidden;
        pre.copy_from_slice(&self.shared_bias);
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.shared_weights[i * h..(i + 1) * h];
            for (p, w) in pre.iter_mut().zip(row) {
                *p += xi * w;
            }
        }
        for (a, &p) in act.iter_mut().zip(pre.iter()) {
            *a = p.max(0.0);
        }
    }
}

const MAGIC: &[u8; 4] = b"SGVC";
const VERSION: u32 = 1;

/// `SGVC`, version, d, h (u32 LE), then every parameter as f64 LE in
/// declaration order.
pub fn encode_params(p: &PixelClassifier) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * p.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(p.dim as u32).to_le_bytes());
    out.extend_from_slice(&(p.hidden as u32).to_le_bytes());
    for v in p.to_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<PixelClassifier> {
    if bytes.len() < 16 {
        return Err(Error::format(bytes.len(), "truncated classifier header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected SGVC"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let (dim, hidden) = (word(8) as usize, word(12) as usize);
    if dim == 0 || hidden == 0 {
        return Err(Error::format(8, "zero dimension"));
    }
    let count = dim * hidden + hidden + 3 * (hidden + 1);
    let need = 16 + 8 * count;
    if bytes.len() != need {
        return Err(Error::format(
            bytes.len().min(need),
            format!("expected {need} bytes, found {}", bytes.len()),
        ));
    }
    let flat: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(16 + 8 * i, "non-finite parameter"));
    }
    PixelClassifier::from_flat(dim, hidden, &flat)
}

pub fn save_params(path: impl AsRef<Path>, p: &PixelClassifier) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_params(p)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<PixelClassifier> {
    let path = path.as_ref();
    decode_params(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_follows_declaration_order() {
        let mut p = PixelClassifier::zeros(2, 3);
        p.shared_weights = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        p.shared_bias = vec![7.0, 8.0, 9.0];
        p.head_fg.bias = 10.0;
        p.head_f2.weights[2] = 11.0;
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.param_count());
        assert_eq!(&flat[..9], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(flat[12], 10.0);
        assert_eq!(flat[19], 11.0);
        assert_eq!(PixelClassifier::from_flat(2, 3, &flat).unwrap(), p);
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(PixelClassifier::init(6, 16, 3), PixelClassifier::init(6, 16, 3));
        assert_ne!(PixelClassifier::init(6, 16, 3), PixelClassifier::init(6, 16, 4));
    }

    #[test]
    fn params_round_trip_and_reject_garbage() {
        let p = PixelClassifier::init(6, 5, 11);
        let bytes = encode_params(&p);
        assert_eq!(&bytes[..4], b"SGVC");
        assert_eq!(decode_params(&bytes).unwrap(), p);
        assert!(decode_params(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_params(&bad), Err(Error::Format { offset: 0, .. })));
        let mut nan = bytes;
        nan[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_params(&nan), Err(Error::Format { offset: 16, .. })));
    }
}
