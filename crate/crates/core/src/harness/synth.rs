//! Desk-scale synthetic sequences: a textured target moving over a textured
//! background, static objects of another category, an optional distractor,
//! and noisy-oracle instance proposals.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{save_attributes, save_sequence, write_bytes, Frame, SequenceData};
use crate::error::{Error, Result};
use crate::eval::Attribute;
use crate::mask::{BinaryMask, PixelFeatures};
use crate::prior::InstanceProposal;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorPolicy {
    #[default]
    #[serde(alias = "None")]
    None,
    /// A second instance of the target category with a different colour.
    #[serde(alias = "SameCategory")]
    SameCategory,
    /// A second instance of the target category that looks exactly like it.
    #[serde(alias = "SameAppearance")]
    SameAppearance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_sequences: usize,
    pub frames_per_sequence: usize,
    pub image_size: usize,
    pub appearance_change_frame_fraction: f64,
    pub distractor: DistractorPolicy,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_sequences: 10,
            frames_per_sequence: 40,
            image_size: 64,
            appearance_change_frame_fraction: 0.5,
            distractor: DistractorPolicy::None,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sequences == 0 {
            return Err(Error::invalid("num_sequences", "must be >= 1"));
        }
        if self.frames_per_sequence == 0 {
            return Err(Error::invalid("frames_per_sequence", "must be >= 1"));
        }
        if self.image_size < 16 {
            return Err(Error::invalid("image_size", "must be >= 16"));
        }
        let f = self.appearance_change_frame_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid("appearance_change_frame_fraction", "must lie in (0, 1)"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Ground-truth instance ids used in proposal manifests.
pub const TARGET_ID: u32 = 1;
/// Static objects get `CLUTTER_ID`, `CLUTTER_ID + 1`, ...
pub const CLUTTER_ID: u32 = 10;
pub const DISTRACTOR_ID: u32 = 2;

pub const TARGET_CATEGORY: &str = "animal";
pub const CLUTTER_CATEGORY: &str = "rock";
const JUNK_CATEGORIES: [&str; 3] = [TARGET_CATEGORY, CLUTTER_CATEGORY, "person"];

/// Proposals of real instances are never less confident than this.
const MIN_TRUE_CONFIDENCE: f64 = 0.75;
const BASE_CONFIDENCE: f64 = 0.9;
const MAX_BOUNDARY_SHIFT: f64 = 3.0;

pub fn sequence_id(i: usize) -> String {
    format!("seq{i:03}")
}

type Rgb = [f64; 3];

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
}

impl Ellipse {
    fn mask(&self, size: usize) -> BinaryMask {
        BinaryMask::from_fn(size, size, |x, y| {
            let dx = (x as f64 + 0.5 - self.cx) / self.a;
            let dy = (y as f64 + 0.5 - self.cy) / self.b;
            dx * dx + dy * dy <= 1.0
        })
    }
}

/// Per-sequence scene parameters, all drawn up front.
struct Scene {
    size: f64,
    bg: Rgb,
    bg_freq: (f64, f64),
    bg_phase: f64,
    bg_drift: f64,
    target_before: Rgb,
    target_after: Rgb,
    rock_colour: Rgb,
    distractor_colour: Rgb,
    start: (f64, f64),
    travel: (f64, f64),
    radius: f64,
    aspect: f64,
    scale_change: f64,
    rocks: [Ellipse; 2],
    change_frame: usize,
    distractor_entry: usize,
}

impl Scene {
    fn draw(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Self {
        let s = cfg.image_size as f64;
        let n = cfg.frames_per_sequence;
        let mut jitter = |c: f64, amp: f64| c + rng.random_range(-amp..=amp);
        let bg = [jitter(0.15, 0.03), jitter(0.35, 0.03), jitter(0.2, 0.03)];
        let target_before = [jitter(0.9, 0.03), jitter(0.45, 0.03), jitter(0.3, 0.03)];
        // The changed target leans towards the rock colour while staying far
        // from the background.
        let target_after = [jitter(0.65, 0.03), jitter(0.3, 0.03), jitter(0.7, 0.03)];
        let rock_colour = [jitter(0.4, 0.03), jitter(0.2, 0.03), jitter(0.75, 0.03)];
        let distractor_colour = [jitter(0.2, 0.03), jitter(0.6, 0.03), jitter(0.9, 0.03)];
        let bg_freq = (rng.random_range(1.0..3.0), rng.random_range(1.0..3.0));
        let bg_phase = rng.random_range(0.0..TAU);
        let bg_drift = if rng.random_bool(0.3) { rng.random_range(0.1..0.3) } else { 0.0 };
        let start = (s * rng.random_range(0.22..0.28), s * rng.random_range(0.47..0.53));
        let travel = (s * rng.random_range(0.2..0.4), s * rng.random_range(-0.04..0.04));
        let radius = s * rng.random_range(0.14..0.16);
        let aspect = rng.random_range(0.0..0.2);
        let scale_change = rng.random_range(-0.15..0.25);
        let rocks = [
            Ellipse { cx: s * 0.82, cy: s * 0.12, a: s * 0.1, b: s * 0.07 },
            Ellipse { cx: s * 0.15, cy: s * 0.88, a: s * 0.1, b: s * 0.07 },
        ];
        let change_frame = ((cfg.appearance_change_frame_fraction * n as f64).round() as usize).max(1);
        let distractor_entry = ((0.25 * n as f64).round() as usize).max(1);
        Scene {
            size: s,
            bg,
            bg_freq,
            bg_phase,
            bg_drift,
            target_before,
            target_after,
            rock_colour,
            distractor_colour,
            start,
            travel,
            radius,
            aspect,
            scale_change,
            rocks,
            change_frame,
            distractor_entry,
        }
    }

    fn progress(&self, t: usize, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            t as f64 / (n - 1) as f64
        }
    }

    fn target(&self, t: usize, n: usize) -> Ellipse {
        let p = self.progress(t, n);
        let r = self.radius * (1.0 + self.scale_change * p);
        Ellipse {
            cx: self.start.0 + self.travel.0 * p,
            cy: self.start.1 + self.travel.1 * p,
            a: r * (1.0 + self.aspect),
            b: r / (1.0 + self.aspect),
        }
    }

    fn target_colour(&self, t: usize) -> Rgb {
        if t >= self.change_frame {
            self.target_after
        } else {
            self.target_before
        }
    }

    /// Enters from the right edge along the bottom and parks there.
    fn distractor(&self, t: usize) -> Option<Ellipse> {
        if t < self.distractor_entry {
            return None;
        }
        let s = self.size;
        let steps = (t - self.distractor_entry) as f64;
        let park = s * 0.8;
        let cx = (s * 1.1 - steps * s * 0.08).max(park);
        Some(Ellipse {
            cx,
            cy: s * 0.86,
            a: s * 0.1,
            b: s * 0.08,
        })
    }

    fn attributes(&self, cfg: &SyntheticConfig) -> BTreeSet<Attribute> {
        let mut a = BTreeSet::from([Attribute::AC]);
        if self.scale_change.abs() >= 0.2 {
            a.insert(Attribute::SV);
        }
        if self.travel.0.hypot(self.travel.1) >= 0.3 * self.size {
            a.insert(Attribute::FM);
        }
        if self.bg_drift > 0.0 {
            a.insert(Attribute::DB);
        }
        if cfg.image_size < 48 {
            a.insert(Attribute::LR);
        }
        a
    }
}

fn paint(img: &mut [Rgb], mask: &BinaryMask, colour: Rgb, size: usize, rng: &mut ChaCha8Rng) {
    let stripe = rng.random_range(0.0..TAU);
    for (i, px) in img.iter_mut().enumerate() {
        if mask.bits()[i] {
            let (x, y) = ((i % size) as f64, (i / size) as f64);
            let tex = 0.04 * ((x + y) * 0.9 + stripe).sin();
            for c in 0..3 {
                let n: f64 = rng.sample(StandardNormal);
                px[c] = colour[c] + tex + 0.03 * n;
            }
        }
    }
}

fn features(img: &[Rgb], size: usize) -> PixelFeatures {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let luma: Vec<f64> = img
        .iter()
        .map(|p| 0.299 * clamp(p[0]) + 0.587 * clamp(p[1]) + 0.114 * clamp(p[2]))
        .collect();
    let s = size as i64;
    let mut values = Vec::with_capacity(img.len() * 6);
    for (i, p) in img.iter().enumerate() {
        let (x, y) = ((i % size) as i64, (i / size) as i64);
        let (mut sum, mut sq) = (0.0, 0.0);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let q = ((y + dy).clamp(0, s - 1) * s + (x + dx).clamp(0, s - 1)) as usize;
                sum += luma[q];
                sq += luma[q] * luma[q];
            }
        }
        let mean = sum / 9.0;
        let var = (sq / 9.0 - mean * mean).max(0.0);
        values.extend_from_slice(&[
            clamp(p[0]),
            clamp(p[1]),
            clamp(p[2]),
            (x as f64 + 0.5) / size as f64,
            (y as f64 + 0.5) / size as f64,
            var,
        ]);
    }
    PixelFeatures::new(size, size, 6, values).expect("finite features")
}

/// Boundary shift of `round(noise * N(0,1))` pixels, clamped to +-3:
/// positive dilates, negative erodes. Never erodes to nothing.
fn perturb(mask: &BinaryMask, noise: f64, rng: &mut ChaCha8Rng) -> BinaryMask {
    if noise == 0.0 {
        return mask.clone();
    }
    let z: f64 = rng.sample(StandardNormal);
    let k = (noise * z).round().clamp(-MAX_BOUNDARY_SHIFT, MAX_BOUNDARY_SHIFT) as i64;
    let out = match k {
        0 => mask.clone(),
        k if k > 0 => mask.dilate(k as usize),
        k => mask.erode((-k) as usize),
    };
    if out.is_empty() {
        mask.clone()
    } else {
        out
    }
}

fn confidence(noise: f64, rng: &mut ChaCha8Rng) -> f64 {
    if noise == 0.0 {
        return BASE_CONFIDENCE;
    }
    let z: f64 = rng.sample(StandardNormal);
    (BASE_CONFIDENCE + 0.03 * noise * z).clamp(MIN_TRUE_CONFIDENCE, 1.0)
}

fn generate_sequence(cfg: &SyntheticConfig, index: usize) -> SequenceData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let scene = Scene::draw(cfg, &mut rng);
    let size = cfg.image_size;
    let n = cfg.frames_per_sequence;
    let noise = cfg.noise_sigma;
    let rocks: Vec<BinaryMask> = scene.rocks.iter().map(|e| e.mask(size)).collect();

    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let phase = scene.bg_phase + scene.bg_drift * t as f64;
        let mut img: Vec<Rgb> = (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f64, (i / size) as f64);
                let wave = 0.06
                    * (TAU * (x * scene.bg_freq.0 + y * scene.bg_freq.1) / scene.size + phase).sin();
                let mut px = scene.bg;
                for c in &mut px {
                    let z: f64 = rng.sample(StandardNormal);
                    *c += wave + 0.03 * z;
                }
                px
            })
            .collect();

        let target = scene.target(t, n).mask(size);
        let colour = scene.target_colour(t);
        let distractor = match cfg.distractor {
            DistractorPolicy::None => None,
            DistractorPolicy::SameCategory => scene.distractor(t).map(|e| (e, scene.distractor_colour)),
            DistractorPolicy::SameAppearance => scene.distractor(t).map(|e| (e, colour)),
        };

        for r in &rocks {
            paint(&mut img, r, scene.rock_colour, size, &mut rng);
        }
        let mut instances: Vec<(u32, &str, BinaryMask)> = Vec::new();
        let occluders = match &distractor {
            Some((e, c)) => {
                let m = e.mask(size);
                paint(&mut img, &m, *c, size, &mut rng);
                let visible = m.difference(&target).expect("same dims");
                let occ = m.union(&target).expect("same dims");
                instances.push((DISTRACTOR_ID, TARGET_CATEGORY, visible));
                occ
            }
            None => target.clone(),
        };
        paint(&mut img, &target, colour, size, &mut rng);
        instances.push((TARGET_ID, TARGET_CATEGORY, target.clone()));
        for (k, r) in rocks.iter().enumerate() {
            let visible = r.difference(&occluders).expect("same dims");
            instances.push((CLUTTER_ID + k as u32, CLUTTER_CATEGORY, visible));
        }

        let mut props: Vec<(Option<u32>, InstanceProposal)> = Vec::new();
        for (id, cat, m) in &instances {
            if m.is_empty() {
                continue;
            }
            let mask = perturb(m, noise, &mut rng);
            let conf = confidence(noise, &mut rng);
            props.push((Some(*id), InstanceProposal::new(mask, *cat, conf).expect("valid proposal")));
        }
        if noise > 0.0 {
            let junk = Ellipse {
                cx: rng.random_range(0.0..scene.size),
                cy: rng.random_range(0.0..scene.size),
                a: scene.size * 0.06,
                b: scene.size * 0.05,
            }
            .mask(size);
            if !junk.is_empty() {
                let cat = JUNK_CATEGORIES[rng.random_range(0..JUNK_CATEGORIES.len())];
                let conf = rng.random_range(0.2..0.6);
                props.push((None, InstanceProposal::new(junk, cat, conf).expect("valid proposal")));
            }
        }
        props.shuffle(&mut rng);
        let (instance_ids, proposals) = props.into_iter().unzip();

        frames.push(Frame {
            features: features(&img, size),
            gt: target,
            proposals,
            instance_ids,
        });
    }
    SequenceData {
        id: sequence_id(index),
        frames,
        attributes: scene.attributes(cfg),
    }
}

/// Generates the whole dataset in memory.
pub fn synth_sequences(cfg: &SyntheticConfig) -> Result<Vec<SequenceData>> {
    cfg.validate()?;
    Ok((0..cfg.num_sequences).map(|i| generate_sequence(cfg, i)).collect())
}

/// Writes the dataset under `root` in the layout described in
/// [`super::dataset`], plus the generating config as `synth.json`.
pub fn synth_generate(cfg: &SyntheticConfig, root: impl AsRef<Path>) -> Result<Vec<SequenceData>> {
    let root = root.as_ref();
    let seqs = synth_sequences(cfg)?;
    let mut attrs = BTreeMap::new();
    for s in &seqs {
        save_sequence(root, s)?;
        attrs.insert(s.id.clone(), s.attributes.clone());
    }
    save_attributes(root, &attrs)?;
    let mut text = serde_json::to_string_pretty(cfg).expect("config serializes");
    text.push('\n');
    write_bytes(&root.join("synth.json"), text.as_bytes())?;
    Ok(seqs)
}
