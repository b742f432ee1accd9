use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::attributes::{Attribute, AttributeStat};
use super::metrics::{j_summary, MetricSummary};
use crate::error::{Error, Result};

/// Per-frame scores of one sequence (the annotated first frame excluded).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub sequence_id: String,
    pub per_frame_j: Vec<f64>,
    pub per_frame_f: Vec<f64>,
    pub attributes: BTreeSet<Attribute>,
}

impl SequenceResult {
    pub fn new(
        id: impl Into<String>,
        per_frame_j: Vec<f64>,
        per_frame_f: Vec<f64>,
        attributes: BTreeSet<Attribute>,
    ) -> Self {
        SequenceResult {
            sequence_id: id.into(),
            per_frame_j,
            per_frame_f,
            attributes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_frame_j.len() != self.per_frame_f.len() {
            return Err(Error::invalid(
                "per_frame_f",
                format!("{} F values for {} J values", self.per_frame_f.len(), self.per_frame_j.len()),
            ));
        }
        let ok = |v: &f64| (0.0..=1.0).contains(v);
        if !self.per_frame_j.iter().all(ok) || !self.per_frame_f.iter().all(ok) {
            return Err(Error::invalid("per_frame", "scores must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Plain mean of J (0 for an empty sequence).
    pub fn mean_j(&self) -> f64 {
        if self.per_frame_j.is_empty() {
            0.0
        } else {
            self.per_frame_j.iter().sum::<f64>() / self.per_frame_j.len() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sequence_id: String,
    pub j: MetricSummary,
    pub f: MetricSummary,
}

/// Per-sequence summaries plus their column-wise mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub aggregate: Option<ReportRow>,
}

pub const AGGREGATE_ID: &str = "aggregate";
pub const CSV_HEADER: &str = "sequence_id,J-M,J-O,J-D,F-M,F-O,F-D";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::invalid("format", format!("expected csv or json, got {s:?}"))),
        }
    }
}

pub fn per_sequence_table(results: &[SequenceResult]) -> Result<Report> {
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        r.validate()?;
        rows.push(ReportRow {
            sequence_id: r.sequence_id.clone(),
            j: j_summary(&r.per_frame_j)?,
            f: j_summary(&r.per_frame_f)?,
        });
    }
    let aggregate = (!rows.is_empty()).then(|| {
        let n = rows.len() as f64;
        let avg = |get: fn(&ReportRow) -> f64| rows.iter().map(get).sum::<f64>() / n;
        ReportRow {
            sequence_id: AGGREGATE_ID.to_string(),
            j: MetricSummary {
                mean: avg(|r| r.j.mean),
                recall: avg(|r| r.j.recall),
                decay: avg(|r| r.j.decay),
            },
            f: MetricSummary {
                mean: avg(|r| r.f.mean),
                recall: avg(|r| r.f.recall),
                decay: avg(|r| r.f.decay),
            },
        }
    });
    Ok(Report { rows, aggregate })
}

/// Quotes a field when it holds a comma, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn report_csv(report: &Report) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in report.rows.iter().chain(&report.aggregate) {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            csv_field(&row.sequence_id),
            row.j.mean,
            row.j.recall,
            row.j.decay,
            row.f.mean,
            row.f.recall,
            row.f.decay
        );
    }
    out
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_report_json(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| Error::invalid("report", e.to_string()))
}

pub fn decay_csv(curve: &[f64]) -> String {
    let mut out = String::from("percent,mean_j\n");
    for (p, v) in curve.iter().enumerate() {
        let _ = writeln!(out, "{p},{v:.4}");
    }
    out
}

pub fn attribute_csv(stats: &[AttributeStat]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    let mut out = String::from("attribute,with,without,mean_j,gain\n");
    for s in stats {
        let _ = writeln!(out, "{},{},{},{},{}", s.attribute, s.with, s.without, opt(s.mean), opt(s.gain));
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `summary.<ext>` into `dir` and returns its path.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>, format: ReportFormat) -> Result<PathBuf> {
    let path = dir.as_ref().join(format!("summary.{}", format.extension()));
    let text = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => report_json(report),
    };
    write_text(&path, &text)?;
    Ok(path)
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(id: &str, j: Vec<f64>) -> SequenceResult {
        let f = j.iter().map(|v| v * 0.5).collect();
        SequenceResult::new(id, j, f, BTreeSet::new())
    }

    #[test]
    fn empty_set_is_header_only() {
        let r = per_sequence_table(&[]).unwrap();
        assert_eq!(report_csv(&r), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn single_sequence_aggregate_equals_row() {
        let r = per_sequence_table(&[seq("bear", vec![0.9, 0.8, 0.7, 0.6])]).unwrap();
        let csv = report_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "bear,0.7500,1.0000,0.3000,0.3750,0.0000,0.1500");
        assert_eq!(lines[2].replacen("aggregate", "bear", 1), lines[1]);
    }

    #[test]
    fn awkward_ids_are_quoted() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn json_reload_is_bit_exact() {
        let r = per_sequence_table(&[
            seq("a", vec![0.1 + 0.2, 1.0 / 3.0, 0.7, 0.123456789012345]),
            seq("b", vec![0.5, 0.25, 2.0f64.sqrt() / 2.0, 0.0]),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = emit_report(&r, dir.path(), ReportFormat::Json).unwrap();
        let back = load_report_json(&path).unwrap();
        assert_eq!(back, r);
        let bits = |r: &Report| -> Vec<u64> {
            r.rows
                .iter()
                .chain(&r.aggregate)
                .flat_map(|x| [x.j.mean, x.j.recall, x.j.decay, x.f.mean, x.f.recall, x.f.decay])
                .map(f64::to_bits)
                .collect()
        };
        assert_eq!(bits(&back), bits(&r));
    }

    #[test]
    fn short_or_inconsistent_sequences_fail() {
        assert!(per_sequence_table(&[seq("s", vec![0.5; 3])]).is_err());
        let mut bad = seq("s", vec![0.5; 4]);
        bad.per_frame_f.pop();
        assert!(per_sequence_table(&[bad]).is_err());
    }

    #[test]
    fn decay_csv_shape() {
        let csv = decay_csv(&[0.5; 101]);
        assert_eq!(csv.lines().count(), 102);
        assert!(csv.starts_with("percent,mean_j\n0,0.5000\n"));
        assert!(csv.ends_with("100,0.5000\n"));
    }

    #[test]
    fn unwritable_path_errors() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let r = per_sequence_table(&[]).unwrap();
        assert!(emit_report(&r, blocker.join("sub"), ReportFormat::Csv).is_err());
    }
}
