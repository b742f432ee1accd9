//! Semantic selection on the annotated first frame, propagation of the
//! selected instance set to later frames, and the smoothed weight map that
//! gates the conditional classifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::mask::{gaussian_blur, iou, threshold, BinaryMask, ProbMap, WeightMap};

/// One candidate instance from an external instance segmenter.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceProposal {
    pub mask: BinaryMask,
    pub category: String,
    pub confidence: f64,
}

impl InstanceProposal {
    pub fn new(mask: BinaryMask, category: impl Into<String>, confidence: f64) -> Result<Self> {
        let category = category.into();
        if category.is_empty() {
            return Err(Error::invalid("category", "must be nonempty"));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(
                "confidence",
                format!("{confidence} outside [0, 1]"),
            ));
        }
        Ok(InstanceProposal {
            mask,
            category,
            confidence,
        })
    }
}

/// Category multiset fixed on the first frame.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticDescriptor {
    counts: BTreeMap<String, usize>,
}

impl SemanticDescriptor {
    pub fn from_categories<'a>(cats: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = BTreeMap::new();
        for c in cats {
            *counts.entry(c.to_owned()).or_insert(0) += 1;
        }
        SemanticDescriptor { counts }
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    pub fn required(&self, category: &str) -> usize {
        self.counts.get(category).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagationScore {
    /// Mean foreground estimate over the proposal's pixels.
    #[default]
    MeanForegroundInside,
    /// IoU between the proposal and the foreground estimate thresholded at 0.5.
    IoUWithThresholdedForeground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub confidence_threshold: f64,
    pub selection_min_precision: f64,
    pub selection_min_gain: f64,
    pub sigma_prior: f64,
    pub propagation_score: PropagationScore,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            confidence_threshold: 0.7,
            selection_min_precision: 0.5,
            selection_min_gain: 0.05,
            sigma_prior: 5.0,
            propagation_score: PropagationScore::MeanForegroundInside,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} outside [0, 1]")))
            }
        };
        unit("confidence_threshold", self.confidence_threshold)?;
        unit("selection_min_precision", self.selection_min_precision)?;
        if !(self.selection_min_gain >= 0.0) {
            return Err(Error::invalid("selection_min_gain", "must be >= 0"));
        }
        if !(self.sigma_prior >= 0.0) || !self.sigma_prior.is_finite() {
            return Err(Error::invalid("sigma_prior", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Indices of proposals whose confidence reaches the threshold, in input order.
pub fn confident_indices(proposals: &[InstanceProposal], cfg: &PriorConfig) -> Vec<usize> {
    proposals
        .iter()
        .enumerate()
        .filter(|(_, p)| p.confidence >= cfg.confidence_threshold)
        .map(|(i, _)| i)
        .collect()
}

pub fn filter_proposals(proposals: &[InstanceProposal], cfg: &PriorConfig) -> Vec<InstanceProposal> {
    confident_indices(proposals, cfg)
        .into_iter()
        .map(|i| proposals[i].clone())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub descriptor: SemanticDescriptor,
    /// Indices into the proposal slice, in selection order.
    pub indices: Vec<usize>,
    pub selected: Vec<InstanceProposal>,
}

/// Greedy precision-gated cover of the ground truth by proposals.
///
/// Each round picks the unselected proposal with the highest ratio of newly
/// covered ground-truth pixels to its own size, among proposals whose
/// precision against the ground truth is at least `selection_min_precision`.
/// Ties prefer the larger absolute gain, then the earlier proposal. The loop
/// stops when the best gain falls below `selection_min_gain * |gt|`.
pub fn semantic_select(
    gt: &BinaryMask,
    proposals: &[InstanceProposal],
    cfg: &PriorConfig,
) -> Result<Selection> {
    for p in proposals {
        ensure_same_dims(gt.dims(), p.mask.dims())?;
    }
    let gt_size = gt.count();
    if gt_size == 0 {
        return Err(Error::invalid("gt", "first-frame ground truth is empty"));
    }
    let min_gain = cfg.selection_min_gain * gt_size as f64;

    let mut candidates: Vec<(usize, usize)> = Vec::new(); // (index, size)
    for (i, p) in proposals.iter().enumerate() {
        let size = p.mask.count();
        if size == 0 {
            continue;
        }
        let precision = p.mask.intersection_count(gt)? as f64 / size as f64;
        if precision >= cfg.selection_min_precision {
            candidates.push((i, size));
        }
    }

    let mut uncovered = gt.clone();
    let mut indices = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None; // (candidate slot, gain, ratio)
        for (slot, &(i, size)) in candidates.iter().enumerate() {
            let gain = proposals[i].mask.intersection_count(&uncovered)?;
            let ratio = gain as f64 / size as f64;
            let better = match best {
                None => true,
                Some((_, bg, br)) => ratio > br || (ratio == br && gain > bg),
            };
            if better {
                best = Some((slot, gain, ratio));
            }
        }
        let Some((slot, gain, _)) = best else { break };
        if (gain as f64) < min_gain || gain == 0 {
            break;
        }
        let (i, _) = candidates.remove(slot);
        uncovered = uncovered.difference(&proposals[i].mask)?;
        indices.push(i);
    }

    if indices.is_empty() {
        return Err(Error::SelectionEmpty);
    }
    let selected: Vec<InstanceProposal> = indices.iter().map(|&i| proposals[i].clone()).collect();
    let descriptor = SemanticDescriptor::from_categories(selected.iter().map(|p| p.category.as_str()));
    Ok(Selection {
        descriptor,
        indices,
        selected,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub category: String,
    pub required: usize,
    pub found: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    /// Indices into the proposal slice, grouped by category in descriptor
    /// order and ranked best-first within each category.
    pub indices: Vec<usize>,
    pub selected: Vec<InstanceProposal>,
    pub shortfalls: Vec<Shortfall>,
}

/// Agreement between a proposal and the first-round foreground estimate.
pub fn propagation_score(mask: &BinaryMask, fg: &ProbMap, kind: PropagationScore) -> Result<f64> {
    ensure_same_dims(mask.dims(), fg.dims())?;
    match kind {
        PropagationScore::MeanForegroundInside => {
            let (mut sum, mut n) = (0.0, 0usize);
            for (&b, &v) in mask.bits().iter().zip(fg.values()) {
                if b {
                    sum += v;
                    n += 1;
                }
            }
            Ok(if n == 0 { 0.0 } else { sum / n as f64 })
        }
        PropagationScore::IoUWithThresholdedForeground => iou(mask, &threshold(fg, 0.5)?),
    }
}

/// Re-identifies the descriptor's instances among this frame's proposals:
/// for each category, the `n_c` proposals that agree best with `fg`.
pub fn semantic_propagate(
    desc: &SemanticDescriptor,
    proposals: &[InstanceProposal],
    fg: &ProbMap,
    cfg: &PriorConfig,
) -> Result<Propagation> {
    let mut scored = Vec::with_capacity(proposals.len());
    for (i, p) in proposals.iter().enumerate() {
        if desc.required(&p.category) == 0 {
            continue;
        }
        let s = propagation_score(&p.mask, fg, cfg.propagation_score)?;
        scored.push((i, s));
    }

    let mut indices = Vec::new();
    let mut shortfalls = Vec::new();
    for (category, &required) in desc.counts() {
        let mut cands: Vec<(usize, f64)> = scored
            .iter()
            .copied()
            .filter(|&(i, _)| proposals[i].category == *category)
            .collect();
        cands.sort_by(|&(ia, sa), &(ib, sb)| {
            sb.total_cmp(&sa)
                .then_with(|| proposals[ib].confidence.total_cmp(&proposals[ia].confidence))
                .then(ia.cmp(&ib))
        });
        if cands.len() < required {
            shortfalls.push(Shortfall {
                category: category.clone(),
                required,
                found: cands.len(),
            });
        }
        indices.extend(cands.iter().take(required).map(|&(i, _)| i));
    }
    let selected = indices.iter().map(|&i| proposals[i].clone()).collect();
    Ok(Propagation {
        indices,
        selected,
        shortfalls,
    })
}

/// Union of the selected masks, Gaussian-smoothed. An empty selection gives
/// the neutral map `w = 0.5`.
pub fn build_prior(
    selected: &[InstanceProposal],
    dims: (usize, usize),
    cfg: &PriorConfig,
) -> Result<WeightMap> {
    let (w, h) = dims;
    if selected.is_empty() {
        return WeightMap::uniform(w, h, 0.5);
    }
    let mut union = BinaryMask::empty(w, h);
    for p in selected {
        union = union.union(&p.mask)?;
    }
    Ok(gaussian_blur(&union.to_real(), cfg.sigma_prior)?.into())
}
