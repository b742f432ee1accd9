use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sgv_core::classifier::grad_check_seeded;
use sgv_core::eval::{per_sequence_table, ReportFormat, SequenceResult};
use sgv_core::harness::{evaluate_predictions, run_pipeline, synth_generate, Mode, PipelineConfig, SyntheticConfig};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "sgv", version, about = "Semantically guided video object segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Run the pipeline over a dataset and write reports.
    Run(RunArgs),
    /// Score stored predictions against a dataset's ground truth.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a random instance.
    Gradcheck(GradArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Dataset root to create.
    #[arg(long)]
    out: PathBuf,
    /// JSON generator settings; defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// conditional, monolithic_baseline or prior_only.
    #[arg(long)]
    mode: Option<Mode>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    format: Option<ReportFormat>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Directory holding `<sequence>/NNNNN.pbm` predictions.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

enum Failure {
    Config(String),
    Runtime(String),
}

type Outcome = Result<u8, Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: invalid config: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_synth_config(path: &Path) -> Result<SyntheticConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn synth(a: SynthArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => load_synth_config(p).map_err(Failure::Config)?,
        None => SyntheticConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let seqs = synth_generate(&cfg, &a.out).map_err(runtime)?;
    println!("wrote {} sequences to {}", seqs.len(), a.out.display());
    Ok(0)
}

fn print_aggregate(results: &[SequenceResult]) -> Result<(), Failure> {
    let report = per_sequence_table(results).map_err(runtime)?;
    if let Some(agg) = report.aggregate {
        println!(
            "J-M {:.4} J-O {:.4} J-D {:.4} F-M {:.4} F-O {:.4} F-D {:.4}",
            agg.j.mean, agg.j.recall, agg.j.decay, agg.f.mean, agg.f.recall, agg.f.decay
        );
    }
    Ok(())
}

fn report_failures<'a>(failures: impl IntoIterator<Item = (&'a str, &'a str)>) -> u8 {
    let mut code = 0;
    for (id, err) in failures {
        eprintln!("sequence {id} failed: {err}");
        code = EXIT_PARTIAL;
    }
    code
}

fn run(a: RunArgs) -> Outcome {
    let mut cfg = PipelineConfig::load(&a.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(f) = a.format {
        cfg.format = f;
    }
    let summary = run_pipeline(&cfg).map_err(runtime)?;
    print_aggregate(&summary.results)?;
    println!("reports: {}", summary.run_dir.display());
    Ok(report_failures(
        summary.failures.iter().map(|f| (f.sequence_id.as_str(), f.error.as_str())),
    ))
}

fn eval(a: EvalArgs) -> Outcome {
    let out = evaluate_predictions(&a.dataset, &a.predictions, &a.out, a.format).map_err(runtime)?;
    print_aggregate(&out.results)?;
    println!("reports: {}", a.out.display());
    Ok(report_failures(
        out.failures.iter().map(|f| (f.sequence_id.as_str(), f.error.as_str())),
    ))
}

fn gradcheck(a: GradArgs) -> Outcome {
    let report = grad_check_seeded(a.seed, a.eps).map_err(|e| Failure::Config(e.to_string()))?;
    println!("max relative error: {:e}", report.max_rel_error);
    Ok(if report.max_rel_error < GRAD_TOLERANCE { 0 } else { EXIT_PARTIAL })
}
