use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Mode, PipelineConfig, ResolvedSettings};
use super::dataset::{frame_name, list_sequences, load_attributes, load_sequence, Frame, SequenceData};
use crate::classifier::{classifier_forward, fuse_forward, train, PixelClassifier, Stage, TrainFrame};
use crate::error::{Error, Result};
use crate::eval::{
    attribute_csv, attribute_summary, csv_field, decay_csv, decay_curve, default_d_close, default_f_tolerance,
    emit_report, error_partition, f_measure, per_sequence_table, region_similarity, write_text, ErrorPartition,
    SequenceResult,
};
use crate::mask::{save_mask, BinaryMask, WeightMap};
use crate::postprocess::{bilateral_filter, finalize};
use crate::prior::{build_prior, confident_indices, semantic_propagate, semantic_select, Shortfall};
use crate::prior::{InstanceProposal, PriorConfig, SemanticDescriptor};

/// Which proposals made up the prior on one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameAudit {
    pub frame: usize,
    /// Indices into the frame's proposal manifest.
    pub indices: Vec<usize>,
    pub instance_ids: Vec<Option<u32>>,
    pub shortfalls: Vec<Shortfall>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceAudit {
    pub sequence_id: String,
    pub mode: Mode,
    /// Semantic selection on the first frame found nothing; the prior fell
    /// back to the neutral `w = 0.5`.
    pub selection_fallback: bool,
    pub descriptor: BTreeMap<String, usize>,
    pub first_frame: Option<FrameAudit>,
    pub frames: Vec<FrameAudit>,
}

/// Everything produced for one sequence. `predictions[k]` is frame `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceOutput {
    pub predictions: Vec<BinaryMask>,
    pub audit: SequenceAudit,
    pub result: SequenceResult,
    pub partition: ErrorPartition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceFailure {
    pub sequence_id: String,
    pub error: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub outputs: Vec<SequenceOutput>,
    pub failures: Vec<SequenceFailure>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub results: Vec<SequenceResult>,
    pub failures: Vec<SequenceFailure>,
}

impl RunSummary {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The frozen first-frame state of a sequence.
struct Anchor {
    weight: WeightMap,
    descriptor: SemanticDescriptor,
    first_frame: Option<FrameAudit>,
    fallback: bool,
}

fn confident(frame: &Frame, cfg: &PriorConfig) -> (Vec<usize>, Vec<InstanceProposal>) {
    let idx = confident_indices(&frame.proposals, cfg);
    let props = idx.iter().map(|&i| frame.proposals[i].clone()).collect();
    (idx, props)
}

fn audit_for(frame: usize, src: &Frame, map: &[usize], local: &[usize], shortfalls: Vec<Shortfall>) -> FrameAudit {
    let indices: Vec<usize> = local.iter().map(|&k| map[k]).collect();
    FrameAudit {
        frame,
        instance_ids: indices.iter().map(|&i| src.instance_ids.get(i).copied().flatten()).collect(),
        indices,
        shortfalls,
    }
}

fn anchor(seq: &SequenceData, cfg: &PipelineConfig) -> Result<Anchor> {
    let first = &seq.frames[0];
    let dims = first.gt.dims();
    if cfg.mode == Mode::MonolithicBaseline {
        return Ok(Anchor {
            weight: WeightMap::uniform(dims.0, dims.1, 1.0)?,
            descriptor: SemanticDescriptor::default(),
            first_frame: None,
            fallback: false,
        });
    }
    let (map, props) = confident(first, &cfg.prior);
    match semantic_select(&first.gt, &props, &cfg.prior) {
        Ok(sel) => Ok(Anchor {
            weight: build_prior(&sel.selected, dims, &cfg.prior)?,
            first_frame: Some(audit_for(0, first, &map, &sel.indices, vec![])),
            descriptor: sel.descriptor,
            fallback: false,
        }),
        Err(Error::SelectionEmpty) => Ok(Anchor {
            weight: WeightMap::uniform(dims.0, dims.1, 0.5)?,
            descriptor: SemanticDescriptor::default(),
            first_frame: None,
            fallback: true,
        }),
        Err(e) => Err(e),
    }
}

fn check_sequence(seq: &SequenceData) -> Result<()> {
    if seq.frames.len() < 5 {
        return Err(Error::TooFewFrames {
            required: 5,
            actual: seq.frames.len(),
        });
    }
    Ok(())
}

/// Predicts frame `t >= 1` from features and proposals only.
fn predict(
    frame: &Frame,
    t: usize,
    params: &PixelClassifier,
    anchor: &Anchor,
    cfg: &PipelineConfig,
) -> Result<(BinaryMask, Option<FrameAudit>)> {
    let heads = classifier_forward(&frame.features, params)?;
    if cfg.mode == Mode::MonolithicBaseline {
        let smooth = bilateral_filter(&heads.f1, &frame.features.luminance(), &cfg.bilateral)?;
        return Ok((finalize(&smooth, cfg.threshold)?, None));
    }
    let (map, props) = confident(frame, &cfg.prior);
    let prop = semantic_propagate(&anchor.descriptor, &props, &heads.fg_estimate, &cfg.prior)?;
    let local: Vec<usize> = prop.indices.to_vec();
    let audit = audit_for(t, frame, &map, &local, prop.shortfalls);
    let dims = frame.features.dims();
    let mask = match cfg.mode {
        Mode::PriorOnly => {
            let mut u = BinaryMask::empty(dims.0, dims.1);
            for p in &prop.selected {
                u = u.union(&p.mask)?;
            }
            u
        }
        _ => {
            let w = build_prior(&prop.selected, dims, &cfg.prior)?;
            let fused = fuse_forward(&heads.f1, &heads.f2, &w)?;
            let smooth = bilateral_filter(&fused, &frame.features.luminance(), &cfg.bilateral)?;
            finalize(&smooth, cfg.threshold)?
        }
    };
    Ok((mask, Some(audit)))
}

fn evaluate(seq: &SequenceData, preds: &[BinaryMask]) -> Result<(SequenceResult, ErrorPartition)> {
    let gts: Vec<BinaryMask> = seq.frames[1..].iter().map(|f| f.gt.clone()).collect();
    score_sequence(&seq.id, &seq.attributes, preds, &gts)
}

pub(crate) fn score_sequence(
    id: &str,
    attributes: &std::collections::BTreeSet<crate::eval::Attribute>,
    preds: &[BinaryMask],
    gts: &[BinaryMask],
) -> Result<(SequenceResult, ErrorPartition)> {
    if preds.len() != gts.len() || gts.is_empty() {
        return Err(Error::invalid("predictions", format!("{} predictions for {} frames", preds.len(), gts.len())));
    }
    let (w, h) = gts[0].dims();
    let tol = default_f_tolerance(w, h);
    let scores = preds
        .par_iter()
        .zip(gts)
        .map(|(p, g)| Ok((region_similarity(p, g)?, f_measure(p, g, tol)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (j, f) = scores.into_iter().unzip();
    let result = SequenceResult::new(id, j, f, attributes.clone());
    let partition = error_partition(preds, gts, default_d_close(w, h))?;
    Ok((result, partition))
}

fn process(seq: &SequenceData, anchor: &Anchor, base: &PixelClassifier, cfg: &PipelineConfig) -> Result<SequenceOutput> {
    let first = &seq.frames[0];
    let frame0 = TrainFrame {
        features: &first.features,
        gt: &first.gt,
        weight: &anchor.weight,
    };
    let params = train(&[frame0], &cfg.train, Stage::Finetune, base)?.params;
    let predicted = seq.frames[1..]
        .par_iter()
        .enumerate()
        .map(|(k, f)| predict(f, k + 1, &params, anchor, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (predictions, audits): (Vec<BinaryMask>, Vec<Option<FrameAudit>>) = predicted.into_iter().unzip();
    let (result, partition) = evaluate(seq, &predictions)?;
    Ok(SequenceOutput {
        predictions,
        audit: SequenceAudit {
            sequence_id: seq.id.clone(),
            mode: cfg.mode,
            selection_fallback: anchor.fallback,
            descriptor: anchor.descriptor.counts().clone(),
            first_frame: anchor.first_frame.clone(),
            frames: audits.into_iter().flatten().collect(),
        },
        result,
        partition,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))
}

/// Runs the pipeline on sequences already in memory. Per-sequence errors
/// are collected rather than propagated.
///
/// When `pretrain_steps > 0` the classifier is first trained on the
/// annotated frames of all usable sequences together, then fine-tuned on
/// each sequence's own first frame. Only first-frame ground truth reaches
/// training or selection; later masks are used for scoring alone.
pub fn run_sequences(seqs: &[SequenceData], cfg: &PipelineConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    thread_pool(cfg.jobs)?.install(|| run_in_pool(seqs, cfg))
}

fn run_in_pool(seqs: &[SequenceData], cfg: &PipelineConfig) -> Result<RunOutcome> {
    let mut failures = Vec::new();
    let mut ready: Vec<(&SequenceData, Anchor)> = Vec::new();
    for seq in seqs {
        match check_sequence(seq).and_then(|_| anchor(seq, cfg)) {
            Ok(a) => ready.push((seq, a)),
            Err(e) => failures.push(SequenceFailure {
                sequence_id: seq.id.clone(),
                error: e.to_string(),
            }),
        }
    }

    let mut outputs = Vec::new();
    if let Some((seq0, _)) = ready.first() {
        let dim = seq0.frames[0].features.dim();
        let mut base = PixelClassifier::init(dim, cfg.train.hidden_units, cfg.init_seed());
        if cfg.train.pretrain_steps > 0 {
            let frames: Vec<TrainFrame<'_>> = ready
                .iter()
                .filter(|(s, _)| s.frames[0].features.dim() == dim)
                .map(|(s, a)| TrainFrame {
                    features: &s.frames[0].features,
                    gt: &s.frames[0].gt,
                    weight: &a.weight,
                })
                .collect();
            base = train(&frames, &cfg.train, Stage::Pretrain, &base)?.params;
        }
        for (seq, a) in &ready {
            match process(seq, a, &base, cfg) {
                Ok(out) => outputs.push(out),
                Err(e) => failures.push(SequenceFailure {
                    sequence_id: seq.id.clone(),
                    error: e.to_string(),
                }),
            }
        }
    }
    failures.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    Ok(RunOutcome { outputs, failures })
}

/// Loads every sequence under `dataset_root`, runs, and writes the report
/// tree to `output_root/<run-id>/`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let ids = list_sequences(&cfg.dataset_root)?;
    let attrs = load_attributes(&cfg.dataset_root)?;
    let mut seqs = Vec::new();
    let mut load_failures = Vec::new();
    for id in ids {
        let a = attrs.get(&id).cloned().unwrap_or_default();
        match load_sequence(&cfg.dataset_root, &id, a) {
            Ok(s) => seqs.push(s),
            Err(e) => load_failures.push(SequenceFailure {
                sequence_id: id,
                error: e.to_string(),
            }),
        }
    }
    let mut outcome = run_sequences(&seqs, cfg)?;
    outcome.failures.extend(load_failures);
    outcome.failures.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    let run_dir = cfg.run_dir();
    write_run(&run_dir, cfg, &outcome)?;
    Ok(RunSummary {
        run_dir,
        results: outcome.outputs.into_iter().map(|o| o.result).collect(),
        failures: outcome.failures,
    })
}

fn json_text<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Per-sequence error partition plus the mean over sequences.
pub fn partition_csv(rows: &[(String, ErrorPartition)]) -> String {
    let mut out = String::from("sequence_id,fp_close_pct,fp_far_pct,fn_pct\n");
    for (id, p) in rows {
        let _ = writeln!(out, "{},{:.4},{:.4},{:.4}", csv_field(id), p.fp_close_pct, p.fp_far_pct, p.fn_pct);
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let avg = |f: fn(&ErrorPartition) -> f64| rows.iter().map(|(_, p)| f(p)).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "aggregate,{:.4},{:.4},{:.4}",
            avg(|p| p.fp_close_pct),
            avg(|p| p.fp_far_pct),
            avg(|p| p.fn_pct)
        );
    }
    out
}

fn per_frame_csv(results: &[SequenceResult]) -> String {
    let mut out = String::from("sequence_id,frame,j,f\n");
    for r in results {
        for (k, (j, f)) in r.per_frame_j.iter().zip(&r.per_frame_f).enumerate() {
            let _ = writeln!(out, "{},{},{j:.4},{f:.4}", csv_field(&r.sequence_id), k + 1);
        }
    }
    out
}

/// Summary, decay curve, attribute table, error partition, per-frame scores
/// and the failure list.
pub(crate) fn write_reports(
    dir: &Path,
    format: crate::eval::ReportFormat,
    results: &[SequenceResult],
    partitions: &[ErrorPartition],
    failures: &[SequenceFailure],
) -> Result<()> {
    emit_report(&per_sequence_table(results)?, dir, format)?;
    if !results.is_empty() {
        write_text(&dir.join("decay_curve.csv"), &decay_csv(&decay_curve(results)?))?;
    }
    write_text(&dir.join("attributes.csv"), &attribute_csv(&attribute_summary(results)))?;
    let parts: Vec<(String, ErrorPartition)> = results
        .iter()
        .zip(partitions)
        .map(|(r, p)| (r.sequence_id.clone(), *p))
        .collect();
    write_text(&dir.join("error_partition.csv"), &partition_csv(&parts))?;
    write_text(&dir.join("per_frame.csv"), &per_frame_csv(results))?;
    write_text(&dir.join("failures.json"), &json_text(failures))
}

/// Writes the report tree. Contents depend only on results and settings,
/// never on paths, timing or thread count.
pub fn write_run(run_dir: &Path, cfg: &PipelineConfig, outcome: &RunOutcome) -> Result<()> {
    let results: Vec<SequenceResult> = outcome.outputs.iter().map(|o| o.result.clone()).collect();
    let parts: Vec<ErrorPartition> = outcome.outputs.iter().map(|o| o.partition).collect();
    write_reports(run_dir, cfg.format, &results, &parts, &outcome.failures)?;
    write_text(&run_dir.join("settings.json"), &json_text(&ResolvedSettings::from(cfg)))?;
    for o in &outcome.outputs {
        let id = &o.result.sequence_id;
        write_text(&run_dir.join("audit").join(format!("{id}.json")), &json_text(&o.audit))?;
        for (k, m) in o.predictions.iter().enumerate() {
            save_mask(
                run_dir.join("predictions").join(id).join(format!("{}.pbm", frame_name(k + 1))),
                m,
            )?;
        }
    }
    Ok(())
}
