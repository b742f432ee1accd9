use std::path::Path;

use super::dataset::{frame_name, list_sequences, load_attributes, sequence_dir};
use super::pipeline::{score_sequence, write_reports, SequenceFailure};
use crate::error::{Error, Result};
use crate::eval::{ErrorPartition, ReportFormat, SequenceResult};
use crate::mask::{load_mask, BinaryMask};

#[derive(Debug)]
pub struct EvalOutcome {
    pub results: Vec<SequenceResult>,
    pub partitions: Vec<ErrorPartition>,
    pub failures: Vec<SequenceFailure>,
}

fn load_pair(dataset_root: &Path, predictions: &Path, id: &str) -> Result<(Vec<BinaryMask>, Vec<BinaryMask>)> {
    let gt_dir = sequence_dir(dataset_root, id).join("gt");
    let mut gts = Vec::new();
    let mut preds = Vec::new();
    // Frame 0 carries the given annotation and is never scored.
    let mut t = 1;
    loop {
        let name = format!("{}.pbm", frame_name(t));
        let g = gt_dir.join(&name);
        if !g.exists() {
            break;
        }
        let p = predictions.join(id).join(&name);
        if !p.exists() {
            return Err(Error::MissingInput(p));
        }
        gts.push(load_mask(&g)?);
        preds.push(load_mask(&p)?);
        t += 1;
    }
    if gts.is_empty() {
        return Err(Error::MissingInput(gt_dir.join("00001.pbm")));
    }
    Ok((preds, gts))
}

/// Scores `predictions/<id>/NNNNN.pbm` against the dataset's ground truth
/// for frames 1.. and writes the reports into `out_dir`.
pub fn evaluate_predictions(
    dataset_root: impl AsRef<Path>,
    predictions: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<EvalOutcome> {
    let (root, preds_dir) = (dataset_root.as_ref(), predictions.as_ref());
    let attrs = load_attributes(root)?;
    let mut outcome = EvalOutcome {
        results: vec![],
        partitions: vec![],
        failures: vec![],
    };
    for id in list_sequences(root)? {
        let a = attrs.get(&id).cloned().unwrap_or_default();
        let scored = load_pair(root, preds_dir, &id).and_then(|(p, g)| score_sequence(&id, &a, &p, &g));
        match scored.and_then(|(r, p)| crate::eval::j_summary(&r.per_frame_j).map(|_| (r, p))) {
            Ok((r, p)) => {
                outcome.results.push(r);
                outcome.partitions.push(p);
            }
            Err(e) => outcome.failures.push(SequenceFailure {
                sequence_id: id,
                error: e.to_string(),
            }),
        }
    }
    write_reports(out_dir.as_ref(), format, &outcome.results, &outcome.partitions, &outcome.failures)?;
    Ok(outcome)
}
