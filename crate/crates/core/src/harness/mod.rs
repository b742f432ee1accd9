//! End-to-end orchestration: dataset IO, the synthetic generator, and the
//! per-sequence pipeline with its report tree.

mod config;
pub mod dataset;
mod evaluate;
mod pipeline;
pub mod synth;

pub use config::{Mode, PipelineConfig};
pub use dataset::{load_sequence, list_sequences, Frame, SequenceData};
pub use evaluate::{evaluate_predictions, EvalOutcome};
pub use pipeline::{
    partition_csv, run_pipeline, run_sequences, write_run, FrameAudit, RunOutcome, RunSummary, SequenceAudit,
    SequenceFailure, SequenceOutput,
};
pub use synth::{synth_generate, synth_sequences, DistractorPolicy, SyntheticConfig};
