//! Run configuration, read from a JSON file.
//!
//! Every field has a default, so `{}` is a valid configuration that
//! reproduces the published setup apart from the data path. The top-level
//! `seed` is copied into both `model.seed` and `training.seed`; `model.output_scale`
//! is replaced by `output_scale` or, when that is absent, by the largest
//! training-split observation.

use std::path::{Path, PathBuf};

use pluvia_core::dataset::{GapPolicy, SeriesFormat};
use pluvia_core::training::TrainingConfig;
use pluvia_core::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub format: SeriesFormat,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: PathBuf::new(),
            format: SeriesFormat::Long,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    /// Fraction of the cleaned series whose targets are used for training.
    pub split: f64,
    pub gap_policy: GapPolicy,
    pub output_scale: Option<f64>,
    pub seed: u64,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            split: 0.8,
            gap_policy: GapPolicy::Contiguous,
            output_scale: None,
            seed: 0,
            model: ModelConfig::default(),
            training: TrainingConfig::published(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Every problem at once, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.data.path.as_os_str().is_empty() {
            problems.push("data.path is required".to_string());
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            problems.push(format!("split must lie in (0, 1), got {}", self.split));
        }
        if let Some(s) = self.output_scale {
            if !(s > 0.0 && s.is_finite()) {
                problems.push(format!("output_scale must be positive, got {s}"));
            }
        }
        // The derived fields are overwritten, so skip their checks.
        let model = ModelConfig {
            output_scale: 1.0,
            ..self.model.clone()
        };
        problems.extend(model.validate());
        problems.extend(self.training.validate());
        if self.model.window_size != self.training.window_size {
            problems.push(format!(
                "model.window_size ({}) and training.window_size ({}) differ",
                self.model.window_size, self.training.window_size
            ));
        }
        problems
    }

    pub fn ensure_valid(&self) -> CliResult<()> {
        let problems = self.validate();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(problems.join("\n")))
        }
    }
}
