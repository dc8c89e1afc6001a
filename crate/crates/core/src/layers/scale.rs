use serde::{Deserialize, Serialize};

use super::{Layer, LayerGrads};
use crate::error::{PluviaError, Result};
use crate::tensor::Tensor;

/// Multiplies its input by a fixed positive factor, restoring millimetre units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScaleLayer {
    pub scale: f64,
}

impl OutputScaleLayer {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(PluviaError::Parameter(format!(
                "output scale must be positive and finite, got {scale}"
            )));
        }
        Ok(OutputScaleLayer { scale })
    }
}

impl Layer for OutputScaleLayer {
    type Cache = ();

    fn forward_train(&self, input: &Tensor) -> Result<(Tensor, ())> {
        Ok((input.scale(self.scale), ()))
    }

    fn backward(&self, _cache: &(), grad_out: &Tensor) -> Result<LayerGrads> {
        Ok(LayerGrads {
            params: Vec::new(),
            input: grad_out.scale(self.scale),
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }

    fn param_names(&self) -> &'static [&'static str] {
        &[]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_backward_multiply() {
        let layer = OutputScaleLayer::new(2.5).unwrap();
        let x = Tensor::column(&[1.0, -4.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[2.5, -10.0]);
        let g = layer.backward(&(), &x).unwrap();
        assert_eq!(g.input.data(), &[2.5, -10.0]);
        assert!(g.params.is_empty());
    }

    #[test]
    fn rejects_non_positive() {
        assert!(OutputScaleLayer::new(0.0).is_err());
        assert!(OutputScaleLayer::new(f64::NAN).is_err());
    }
}
