use serde::{Deserialize, Serialize};

use super::{
    Conv1DCache, Conv1DLayer, DenseCache, DenseLayer, Layer, LayerGrads, LstmCache, LstmLayer,
    OutputScaleLayer,
};
use crate::error::{PluviaError, Result};
use crate::rng::Rng;
use crate::tensor::{Activation, Tensor};

/// Architecture constants. Defaults are the published configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub window_size: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub lstm1_units: usize,
    pub lstm2_units: usize,
    /// When false the second LSTM emits only its final state and the model
    /// produces a single prediction per window.
    pub lstm2_return_sequences: bool,
    pub dense1_units: usize,
    pub dense2_units: usize,
    /// Millimetre scale restored by the output layer.
    pub output_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window_size: 64,
            conv_filters: 32,
            kernel_size: 5,
            lstm1_units: 64,
            lstm2_units: 60,
            lstm2_return_sequences: true,
            dense1_units: 30,
            dense2_units: 10,
            output_scale: 1.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("window_size", self.window_size),
            ("conv_filters", self.conv_filters),
            ("kernel_size", self.kernel_size),
            ("lstm1_units", self.lstm1_units),
            ("lstm2_units", self.lstm2_units),
            ("dense1_units", self.dense1_units),
            ("dense2_units", self.dense2_units),
        ] {
            if v == 0 {
                problems.push(format!("model.{name} must be at least 1"));
            }
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            problems.push(format!(
                "model.output_scale must be positive, got {}",
                self.output_scale
            ));
        }
        problems
    }

    /// Trainable parameter count implied by the architecture.
    pub fn param_count(&self) -> usize {
        let conv = self.kernel_size * self.conv_filters + self.conv_filters;
        let lstm = |f: usize, h: usize| 4 * (f * h + h * h + h);
        let dense = |i: usize, o: usize| i * o + o;
        conv + lstm(self.conv_filters, self.lstm1_units)
            + lstm(self.lstm1_units, self.lstm2_units)
            + dense(self.lstm2_units, self.dense1_units)
            + dense(self.dense1_units, self.dense2_units)
            + dense(self.dense2_units, 1)
    }
}

/// `Conv1D → LSTM → LSTM → Dense(relu) → Dense(relu) → Dense(linear) → scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnLstmModel {
    pub config: ModelConfig,
    pub conv: Conv1DLayer,
    pub lstm1: LstmLayer,
    pub lstm2: LstmLayer,
    pub dense1: DenseLayer,
    pub dense2: DenseLayer,
    pub head: DenseLayer,
    pub scale: OutputScaleLayer,
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    conv: Conv1DCache,
    lstm1: LstmCache,
    lstm2: LstmCache,
    dense1: DenseCache,
    dense2: DenseCache,
    head: DenseCache,
}

impl CnnLstmModel {
    /// Glorot-uniform weights and zero biases drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let problems = config.validate();
        if !problems.is_empty() {
            return Err(PluviaError::Parameter(problems.join("; ")));
        }
        let mut rng = Rng::new(config.seed);
        let c = &config;
        Ok(CnnLstmModel {
            conv: Conv1DLayer::new(&mut rng, c.kernel_size, 1, c.conv_filters, Activation::Relu)?,
            lstm1: LstmLayer::new(&mut rng, c.conv_filters, c.lstm1_units, true)?,
            lstm2: LstmLayer::new(&mut rng, c.lstm1_units, c.lstm2_units, c.lstm2_return_sequences)?,
            dense1: DenseLayer::new(&mut rng, c.lstm2_units, c.dense1_units, Activation::Relu)?,
            dense2: DenseLayer::new(&mut rng, c.dense1_units, c.dense2_units, Activation::Relu)?,
            head: DenseLayer::new(&mut rng, c.dense2_units, 1, Activation::Linear)?,
            scale: OutputScaleLayer::new(c.output_scale)?,
            config,
        })
    }

    pub fn window_size(&self) -> usize {
        self.config.window_size
    }

    fn check_window(&self, window: &Tensor) -> Result<()> {
        if window.shape() != [self.config.window_size, 1] {
            return Err(PluviaError::dim(
                "model_forward",
                window.shape(),
                &[self.config.window_size, 1],
            ));
        }
        Ok(())
    }

    /// Per-timestep predictions in millimetres, `T x 1` (or `1 x 1` when the
    /// second LSTM does not return sequences).
    pub fn forward(&self, window: &Tensor) -> Result<Tensor> {
        self.forward_train(window).map(|(out, _)| out)
    }

    pub fn forward_train(&self, window: &Tensor) -> Result<(Tensor, ModelCache)> {
        self.check_window(window)?;
        let (x, conv) = self.conv.forward_train(window)?;
        let (x, lstm1) = self.lstm1.forward_train(&x)?;
        let (x, lstm2) = self.lstm2.forward_train(&x)?;
        let x = if self.lstm2.return_sequences {
            x
        } else {
            x.reshape(&[1, self.config.lstm2_units])?
        };
        let (x, dense1) = self.dense1.forward_train(&x)?;
        let (x, dense2) = self.dense2.forward_train(&x)?;
        let (x, head) = self.head.forward_train(&x)?;
        let out = self.scale.forward(&x)?;
        Ok((
            out,
            ModelCache {
                conv,
                lstm1,
                lstm2,
                dense1,
                dense2,
                head,
            },
        ))
    }

    /// Backpropagate `d loss / d output` through the whole stack. Parameter
    /// gradients come back in [`CnnLstmModel::params`] order.
    pub fn backward(&self, cache: &ModelCache, grad_out: &Tensor) -> Result<LayerGrads> {
        let mut params = Vec::with_capacity(13);
        let g = self.scale.backward(&(), grad_out)?;
        let head = self.head.backward(&cache.head, &g.input)?;
        let dense2 = self.dense2.backward(&cache.dense2, &head.input)?;
        let dense1 = self.dense1.backward(&cache.dense1, &dense2.input)?;
        let lstm2 = self.lstm2.backward(&cache.lstm2, &dense1.input)?;
        let lstm1 = self.lstm1.backward(&cache.lstm1, &lstm2.input)?;
        let conv = self.conv.backward(&cache.conv, &lstm1.input)?;
        for part in [conv.params, lstm1.params, lstm2.params, dense1.params, dense2.params, head.params] {
            params.extend(part);
        }
        Ok(LayerGrads {
            params,
            input: conv.input,
        })
    }

    /// One-step-ahead forecast: the final-timestep output, in millimetres.
    pub fn predict_next(&self, window: &Tensor) -> Result<f64> {
        let out = self.forward(window)?;
        Ok(out.data()[out.len() - 1])
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = self.conv.params();
        v.extend(self.lstm1.params());
        v.extend(self.lstm2.params());
        v.extend(self.dense1.params());
        v.extend(self.dense2.params());
        v.extend(self.head.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.conv.params_mut();
        v.extend(self.lstm1.params_mut());
        v.extend(self.lstm2.params_mut());
        v.extend(self.dense1.params_mut());
        v.extend(self.dense2.params_mut());
        v.extend(self.head.params_mut());
        v
    }

    /// Dotted names such as `lstm1.recurrent_weights`, in parameter order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut push = |prefix: &str, layer: &[&str]| {
            names.extend(layer.iter().map(|n| format!("{prefix}.{n}")));
        };
        push("conv", self.conv.param_names());
        push("lstm1", self.lstm1.param_names());
        push("lstm2", self.lstm2.param_names());
        push("dense1", self.dense1.param_names());
        push("dense2", self.dense2.param_names());
        push("head", self.head.param_names());
        names
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Replace every parameter tensor, checking shapes.
    pub fn set_params(&mut self, values: Vec<Tensor>) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(PluviaError::Parameter(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, value) in slots.iter().zip(&values) {
            if slot.shape() != value.shape() {
                return Err(PluviaError::dim("set_params", value.shape(), slot.shape()));
            }
        }
        for (slot, value) in slots.iter_mut().zip(values) {
            **slot = value;
        }
        Ok(())
    }

    pub fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.data_mut().fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_parameter_count() {
        let model = CnnLstmModel::new(ModelConfig::default()).unwrap();
        let expected = 192 + 24_832 + 30_000 + (60 * 30 + 30) + (30 * 10 + 10) + (10 + 1);
        assert_eq!(model.param_count(), expected);
        assert_eq!(model.config.param_count(), expected);
        assert_eq!(model.conv.param_count(), 192);
        assert_eq!(model.lstm1.param_count(), 24_832);
        assert_eq!(model.lstm2.param_count(), 30_000);
    }

    #[test]
    fn published_shape_chain() {
        let model = CnnLstmModel::new(ModelConfig::default()).unwrap();
        let x = Tensor::full(&[64, 1], 0.3);
        let a = model.conv.forward(&x).unwrap();
        assert_eq!(a.shape(), &[64, 32]);
        let b = model.lstm1.forward(&a).unwrap();
        assert_eq!(b.shape(), &[64, 64]);
        let c = model.lstm2.forward(&b).unwrap();
        assert_eq!(c.shape(), &[64, 60]);
        let d = model.dense1.forward(&c).unwrap();
        assert_eq!(d.shape(), &[64, 30]);
        let e = model.dense2.forward(&d).unwrap();
        assert_eq!(e.shape(), &[64, 10]);
        let f = model.head.forward(&e).unwrap();
        assert_eq!(f.shape(), &[64, 1]);
        assert_eq!(model.forward(&x).unwrap().shape(), &[64, 1]);
    }

    #[test]
    fn wrong_window_length() {
        let model = CnnLstmModel::new(ModelConfig::default()).unwrap();
        assert!(matches!(
            model.forward(&Tensor::zeros(&[63, 1])),
            Err(PluviaError::Dimension { .. })
        ));
    }

    #[test]
    fn deterministic_and_predict_next_is_last_row() {
        let cfg = ModelConfig {
            window_size: 12,
            output_scale: 250.0,
            seed: 11,
            ..ModelConfig::default()
        };
        let model = CnnLstmModel::new(cfg.clone()).unwrap();
        let again = CnnLstmModel::new(cfg).unwrap();
        assert_eq!(model, again);
        let x = Tensor::column(&(0..12).map(|i| i as f64 / 12.0).collect::<Vec<_>>()).unwrap();
        let out = model.forward(&x).unwrap();
        assert_eq!(out, model.forward(&x).unwrap());
        assert_eq!(model.predict_next(&x).unwrap(), out.at(11, 0));
    }

    #[test]
    fn final_state_variant() {
        let cfg = ModelConfig {
            window_size: 8,
            lstm2_return_sequences: false,
            ..ModelConfig::default()
        };
        let model = CnnLstmModel::new(cfg).unwrap();
        let x = Tensor::full(&[8, 1], 0.5);
        let (out, cache) = model.forward_train(&x).unwrap();
        assert_eq!(out.shape(), &[1, 1]);
        let g = model.backward(&cache, &Tensor::full(&[1, 1], 1.0)).unwrap();
        assert_eq!(g.params.len(), model.params().len());
        assert_eq!(g.input.shape(), &[8, 1]);
    }

    #[test]
    fn set_params_checks_shapes() {
        let mut model = CnnLstmModel::new(ModelConfig {
            window_size: 4,
            ..ModelConfig::default()
        })
        .unwrap();
        let mut values: Vec<Tensor> = model.params().into_iter().cloned().collect();
        values.swap(0, 1);
        assert!(model.set_params(values).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ModelConfig {
            lstm1_units: 0,
            output_scale: -1.0,
            ..ModelConfig::default()
        };
        assert_eq!(cfg.validate().len(), 2);
        assert!(CnnLstmModel::new(cfg).is_err());
    }
}
