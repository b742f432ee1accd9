//! Fixtures shared by the benchmarks.

use sgv_core::harness::{synth_sequences, Frame, SyntheticConfig};
use sgv_core::{PixelFeatures, WeightMap};

/// First frame of a noiseless synthetic sequence of the given size.
pub fn frame(size: usize) -> Frame {
    let cfg = SyntheticConfig {
        num_sequences: 1,
        frames_per_sequence: 2,
        image_size: size,
        noise_sigma: 0.0,
        ..SyntheticConfig::default()
    };
    let mut seqs = synth_sequences(&cfg).expect("valid synthetic config");
    seqs.remove(0).frames.remove(0)
}

/// A smooth weight map peaking at the frame centre.
pub fn weight(features: &PixelFeatures) -> WeightMap {
    let (w, h) = features.dims();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let s2 = (w.min(h) as f64 / 4.0).powi(2);
    let vals = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64 - cx, (i / w) as f64 - cy);
            (-(x * x + y * y) / (2.0 * s2)).exp()
        })
        .collect();
    WeightMap::new(w, h, vals).expect("values in [0, 1]")
}
