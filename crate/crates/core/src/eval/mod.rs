//! Sequence-level evaluation: region similarity, contour accuracy, decay,
//! attribute breakdowns, error taxonomy and report files.

mod attributes;
mod decay;
mod metrics;
mod partition;
mod report;

pub use attributes::{attribute_summary, Attribute, AttributeStat};
pub use decay::{decay_curve, resample_at, DECAY_POINTS};
pub use metrics::{
    default_f_tolerance, f_measure, j_summary, region_similarity, MetricSummary, RECALL_THRESHOLD,
};
pub use partition::{default_d_close, error_partition, ErrorPartition, PixelCounts};
pub use report::{
    attribute_csv, csv_field, decay_csv, emit_report, load_report_json, parse_report_json,
    per_sequence_table, report_csv, report_json, Report, ReportFormat, ReportRow, SequenceResult,
    AGGREGATE_ID, CSV_HEADER,
};
pub(crate) use report::write_text;
