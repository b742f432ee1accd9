//! On-disk dataset layout:
//!
//! ```text
//! <root>/attributes.json                     {"<id>": ["AC", ...], ...}
//! <root>/sequences/<id>/features/NNNNN.feat
//! <root>/sequences/<id>/gt/NNNNN.pbm
//! <root>/sequences/<id>/proposals/NNNNN.json
//! ```
//!
//! Proposal manifests list `{"mask_path", "category", "confidence"}` objects,
//! either bare or under an `"objects"` key; `mask_path` is relative to the
//! sequence directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Attribute;
use crate::mask::{load_mask, save_mask, BinaryMask, PixelFeatures};
use crate::prior::InstanceProposal;

const FEAT_MAGIC: &[u8; 4] = b"SGVF";
const FEAT_VERSION: u32 = 1;

/// `SGVF`, version, width, height, dim (u32 LE), then pixel-major f64 LE.
pub fn encode_features(f: &PixelFeatures) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * f.values().len());
    out.extend_from_slice(FEAT_MAGIC);
    for v in [FEAT_VERSION, f.width() as u32, f.height() as u32, f.dim() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<PixelFeatures> {
    if bytes.len() < 20 {
        return Err(Error::format(bytes.len(), "truncated feature header"));
    }
    if &bytes[..4] != FEAT_MAGIC {
        return Err(Error::format(0, "bad magic, expected SGVF"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    if word(4) != FEAT_VERSION as usize {
        return Err(Error::format(4, format!("unsupported version {}", word(4))));
    }
    let (w, h, d) = (word(8), word(12), word(16));
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(d))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(20))
        .ok_or_else(|| Error::format(8, "dimensions overflow"))?;
    if bytes.len() != need {
        return Err(Error::format(
            bytes.len().min(need),
            format!("expected {need} bytes, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(20 + 8 * i, "non-finite feature"));
    }
    PixelFeatures::new(w, h, d, values)
}

pub fn save_features(path: impl AsRef<Path>, f: &PixelFeatures) -> Result<()> {
    write_bytes(path.as_ref(), &encode_features(f))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<PixelFeatures> {
    let path = path.as_ref();
    decode_features(&read_bytes(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub mask_path: String,
    pub category: String,
    pub confidence: f64,
    /// Ground-truth instance this proposal was derived from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub objects: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestForm {
    Wrapped(Manifest),
    Bare(Vec<ManifestEntry>),
}

pub fn parse_manifest(text: &str) -> std::result::Result<Manifest, serde_json::Error> {
    Ok(match serde_json::from_str(text)? {
        ManifestForm::Wrapped(m) => m,
        ManifestForm::Bare(objects) => Manifest { objects },
    })
}

/// One frame of a sequence with its proposals.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub features: PixelFeatures,
    pub gt: BinaryMask,
    pub proposals: Vec<InstanceProposal>,
    /// Parallel to `proposals`.
    pub instance_ids: Vec<Option<u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceData {
    pub id: String,
    pub frames: Vec<Frame>,
    pub attributes: BTreeSet<Attribute>,
}

pub fn frame_name(i: usize) -> String {
    format!("{i:05}")
}

pub fn sequence_dir(root: &Path, id: &str) -> PathBuf {
    root.join("sequences").join(id)
}

/// Sequence ids under `<root>/sequences`, sorted.
pub fn list_sequences(root: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = root.as_ref().join("sequences");
    if !dir.is_dir() {
        return Err(Error::MissingInput(dir));
    }
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        if entry.path().is_dir() {
            if let Some(name) = entry.file_name().to_str() {
                ids.push(name.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// `attributes.json` at the dataset root; an absent file means no attributes.
pub fn load_attributes(root: impl AsRef<Path>) -> Result<BTreeMap<String, BTreeSet<Attribute>>> {
    let path = root.as_ref().join("attributes.json");
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
}

pub fn save_attributes(root: impl AsRef<Path>, attrs: &BTreeMap<String, BTreeSet<Attribute>>) -> Result<()> {
    let path = root.as_ref().join("attributes.json");
    let mut text = serde_json::to_string_pretty(attrs).expect("attributes serialize");
    text.push('\n');
    write_bytes(&path, text.as_bytes())
}

/// Number of frames, taken from the contiguous run of feature files
/// starting at `00000.feat`.
fn frame_count(seq_dir: &Path) -> Result<usize> {
    let feat_dir = seq_dir.join("features");
    if !feat_dir.is_dir() {
        return Err(Error::MissingInput(feat_dir));
    }
    let mut n = 0;
    while feat_dir.join(format!("{}.feat", frame_name(n))).exists() {
        n += 1;
    }
    if n == 0 {
        return Err(Error::MissingInput(feat_dir.join("00000.feat")));
    }
    Ok(n)
}

pub fn load_frame(seq_dir: &Path, i: usize) -> Result<Frame> {
    let name = frame_name(i);
    let features = load_features(seq_dir.join("features").join(format!("{name}.feat")))?;
    let gt_path = seq_dir.join("gt").join(format!("{name}.pbm"));
    if !gt_path.exists() {
        return Err(Error::MissingInput(gt_path));
    }
    let gt = load_mask(&gt_path)?;
    crate::error::ensure_same_dims(features.dims(), gt.dims())?;
    let man_path = seq_dir.join("proposals").join(format!("{name}.json"));
    if !man_path.exists() {
        return Err(Error::MissingInput(man_path));
    }
    let text = fs::read_to_string(&man_path).map_err(|e| Error::io(&man_path, e))?;
    let manifest = parse_manifest(&text).map_err(|e| Error::json(&man_path, e))?;
    let mut proposals = Vec::with_capacity(manifest.objects.len());
    let mut instance_ids = Vec::with_capacity(manifest.objects.len());
    for e in manifest.objects {
        let mask = load_mask(seq_dir.join(&e.mask_path))?;
        crate::error::ensure_same_dims(gt.dims(), mask.dims())?;
        proposals.push(InstanceProposal::new(mask, e.category, e.confidence)?);
        instance_ids.push(e.instance_id);
    }
    Ok(Frame {
        features,
        gt,
        proposals,
        instance_ids,
    })
}

pub fn load_sequence(root: impl AsRef<Path>, id: &str, attributes: BTreeSet<Attribute>) -> Result<SequenceData> {
    let dir = sequence_dir(root.as_ref(), id);
    let n = frame_count(&dir)?;
    let frames = (0..n).map(|i| load_frame(&dir, i)).collect::<Result<Vec<_>>>()?;
    let (dims, dim) = (frames[0].features.dims(), frames[0].features.dim());
    for f in &frames[1..] {
        crate::error::ensure_same_dims(dims, f.features.dims())?;
        if f.features.dim() != dim {
            return Err(Error::FeatureDimMismatch {
                expected: dim,
                actual: f.features.dim(),
            });
        }
    }
    Ok(SequenceData {
        id: id.to_string(),
        frames,
        attributes,
    })
}

/// Writes one frame: features, gt, one PBM per proposal and the manifest.
pub fn save_frame(seq_dir: &Path, i: usize, frame: &Frame) -> Result<()> {
    let name = frame_name(i);
    save_features(seq_dir.join("features").join(format!("{name}.feat")), &frame.features)?;
    save_mask(seq_dir.join("gt").join(format!("{name}.pbm")), &frame.gt)?;
    let mut objects = Vec::with_capacity(frame.proposals.len());
    for (k, (p, id)) in frame.proposals.iter().zip(&frame.instance_ids).enumerate() {
        let rel = format!("proposals/{name}_{k:02}.pbm");
        save_mask(seq_dir.join(&rel), &p.mask)?;
        objects.push(ManifestEntry {
            mask_path: rel,
            category: p.category.clone(),
            confidence: p.confidence,
            instance_id: *id,
        });
    }
    let mut text = serde_json::to_string_pretty(&Manifest { objects }).expect("manifest serializes");
    text.push('\n');
    write_bytes(&seq_dir.join("proposals").join(format!("{name}.json")), text.as_bytes())
}

pub fn save_sequence(root: impl AsRef<Path>, seq: &SequenceData) -> Result<()> {
    let dir = sequence_dir(root.as_ref(), &seq.id);
    for (i, f) in seq.frames.iter().enumerate() {
        save_frame(&dir, i, f)?;
    }
    Ok(())
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
