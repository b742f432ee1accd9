use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::ReportFormat;
use crate::postprocess::{BilateralConfig, DEFAULT_THRESHOLD};
use crate::prior::PriorConfig;

/// Which parts of the model produce the final mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Both conditional heads fused under the propagated prior.
    #[default]
    #[serde(alias = "Conditional")]
    Conditional,
    /// One appearance classifier for the whole frame (`w = 1` throughout).
    #[serde(alias = "MonolithicBaseline")]
    MonolithicBaseline,
    /// Union of the propagated instances, no classifier output, no smoothing.
    #[serde(alias = "PriorOnly")]
    PriorOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Conditional => "conditional",
            Mode::MonolithicBaseline => "monolithic_baseline",
            Mode::PriorOnly => "prior_only",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "conditional" => Ok(Mode::Conditional),
            "monolithic_baseline" | "monolithicbaseline" | "monolithic" => Ok(Mode::MonolithicBaseline),
            "prior_only" | "prioronly" => Ok(Mode::PriorOnly),
            _ => Err(Error::invalid("mode", format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_root: PathBuf,
    pub output_root: PathBuf,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub bilateral: BilateralConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Report directory name under `output_root`; derived from mode and seed
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
    /// Worker threads for per-frame work; 0 picks the available parallelism.
    /// Never affects results.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_format() -> ReportFormat {
    ReportFormat::Csv
}

fn default_jobs() -> usize {
    1
}

impl PipelineConfig {
    pub fn new(dataset_root: impl Into<PathBuf>, output_root: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset_root: dataset_root.into(),
            output_root: output_root.into(),
            prior: PriorConfig::default(),
            train: TrainConfig::default(),
            bilateral: BilateralConfig::default(),
            mode: Mode::default(),
            seed: 0,
            run_id: None,
            threshold: DEFAULT_THRESHOLD,
            format: ReportFormat::Csv,
            jobs: 1,
        }
    }

    /// Reads a JSON config; relative paths are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset_root, &mut cfg.output_root] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.train.validate()?;
        self.bilateral.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid("threshold", "must lie in [0, 1]"));
        }
        if let Some(id) = &self.run_id {
            let bad = id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']);
            if bad {
                return Err(Error::invalid("run_id", format!("{id:?} is not a plain directory name")));
            }
        }
        Ok(())
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.mode.name(), self.seed))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_root.join(self.run_id())
    }

    /// Seed for the classifier initialization.
    pub(crate) fn init_seed(&self) -> u64 {
        self.seed ^ self.train.seed.rotate_left(32)
    }
}

/// The parts of a [`PipelineConfig`] that determine results, without paths
/// or thread counts; written next to the reports.
#[derive(Serialize)]
pub(crate) struct ResolvedSettings<'a> {
    pub mode: Mode,
    pub seed: u64,
    pub threshold: f64,
    pub prior: &'a PriorConfig,
    pub train: &'a TrainConfig,
    pub bilateral: &'a BilateralConfig,
}

impl<'a> From<&'a PipelineConfig> for ResolvedSettings<'a> {
    fn from(c: &'a PipelineConfig) -> Self {
        ResolvedSettings {
            mode: c.mode,
            seed: c.seed,
            threshold: c.threshold,
            prior: &c.prior,
            train: &c.train,
            bilateral: &c.bilateral,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"dataset_root":"d","output_root":"o"}"#).unwrap();
        assert_eq!(cfg, PipelineConfig::new("d", "o"));
        assert_eq!(cfg.run_id(), "conditional-seed0");
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(
            r#"{"dataset_root":"d","output_root":"o","bogus":1}"#
        )
        .is_err());
        let mut cfg = PipelineConfig::new("d", "o");
        cfg.threshold = 1.5;
        assert!(cfg.validate().is_err());
        cfg.threshold = 0.5;
        cfg.run_id = Some("../escape".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn modes_parse_in_several_spellings() {
        for s in ["MonolithicBaseline", "monolithic-baseline", "monolithic_baseline"] {
            assert_eq!(s.parse::<Mode>().unwrap(), Mode::MonolithicBaseline);
        }
        let m: Mode = serde_json::from_str("\"PriorOnly\"").unwrap();
        assert_eq!(m, Mode::PriorOnly);
        assert!("other".parse::<Mode>().is_err());
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"dataset_root":"data","output_root":"/abs/out","mode":"prior_only"}"#).unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset_root, dir.path().join("data"));
        assert_eq!(cfg.output_root, PathBuf::from("/abs/out"));
        assert_eq!(cfg.mode, Mode::PriorOnly);
        assert!(PipelineConfig::load(dir.path().join("missing.json")).is_err());
    }
}
