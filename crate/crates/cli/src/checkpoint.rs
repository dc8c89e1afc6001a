//! JSON checkpoints.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which
//! round-trips binary64 exactly, so save -> load -> save is byte-identical.

use std::io::{self, Write};
use std::path::Path;

use pluvia_core::dataset::GapPolicy;
use pluvia_core::training::TrainingConfig;
use pluvia_core::{CnnLstmModel, ModelConfig, Tensor};
use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub split: f64,
    pub gap_policy: GapPolicy,
    pub seed: u64,
    pub scale: f64,
    pub parameters: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(
        model: &CnnLstmModel,
        training: &TrainingConfig,
        split: f64,
        gap_policy: GapPolicy,
    ) -> Self {
        let parameters = model
            .param_names()
            .into_iter()
            .zip(model.params())
            .map(|(name, t)| NamedTensor {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                values: t.data().to_vec(),
            })
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            model: model.config.clone(),
            training: training.clone(),
            split,
            gap_policy,
            seed: model.config.seed,
            scale: model.config.output_scale,
            parameters,
        }
    }

    /// Rebuild the model, checking names and shapes against the architecture.
    pub fn to_model(&self) -> CliResult<CnnLstmModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::config(format!(
                "unsupported checkpoint format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.scale != self.model.output_scale {
            return Err(CliError::config(format!(
                "checkpoint scale {} disagrees with model.output_scale {}",
                self.scale, self.model.output_scale
            )));
        }
        let mut model = CnnLstmModel::new(self.model.clone())?;
        let names = model.param_names();
        if names.len() != self.parameters.len() {
            return Err(CliError::config(format!(
                "checkpoint has {} parameter tensors, architecture needs {}",
                self.parameters.len(),
                names.len()
            )));
        }
        let mut tensors = Vec::with_capacity(names.len());
        for (expected, stored) in names.iter().zip(&self.parameters) {
            if stored.name != *expected {
                return Err(CliError::config(format!(
                    "checkpoint parameter `{}` found where `{expected}` was expected",
                    stored.name
                )));
            }
            tensors.push(Tensor::new(stored.shape.clone(), stored.values.clone())?);
        }
        model.set_params(tensors)?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats::default());
        self.serialize(&mut ser).expect("checkpoint serializes");
        out.push(b'\n');
        String::from_utf8(out).expect("utf-8")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }
}

/// Pretty printing with every float in fixed 17-digit scientific form.
#[derive(Default)]
struct ExactFloats(PrettyFormatter<'static>);

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}
