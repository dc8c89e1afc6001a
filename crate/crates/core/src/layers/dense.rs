use serde::{Deserialize, Serialize};

use super::{column_sums, Layer, LayerGrads};
use crate::error::{PluviaError, Result};
use crate::rng::Rng;
use crate::tensor::{glorot_uniform, matmul, matmul_nt, matmul_tn, Activation, Tensor};

/// Fully connected layer applied independently to every timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `in x out`
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    preact: Tensor,
}

impl DenseLayer {
    pub fn new(rng: &mut Rng, inputs: usize, outputs: usize, activation: Activation) -> Result<Self> {
        Ok(DenseLayer {
            weights: glorot_uniform(rng, inputs, outputs, &[inputs, outputs])?,
            bias: Tensor::zeros(&[outputs]),
            activation,
        })
    }

    pub fn from_parts(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 || bias.shape() != [weights.shape()[1]] {
            return Err(PluviaError::dim("dense", weights.shape(), bias.shape()));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }
}

impl Layer for DenseLayer {
    type Cache = DenseCache;

    fn forward_train(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        if input.shape().len() != 2 || input.shape()[1] != self.inputs() {
            return Err(PluviaError::dim("dense", input.shape(), self.weights.shape()));
        }
        let mut preact = matmul(input, &self.weights)?;
        let n = self.outputs();
        for row in preact.data_mut().chunks_mut(n) {
            for (v, b) in row.iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        let act = self.activation;
        let out = preact.map(|v| act.apply(v));
        Ok((
            out,
            DenseCache {
                input: input.clone(),
                preact,
            },
        ))
    }

    fn backward(&self, cache: &DenseCache, grad_out: &Tensor) -> Result<LayerGrads> {
        if grad_out.shape() != cache.preact.shape() {
            return Err(PluviaError::dim("dense_backward", grad_out.shape(), cache.preact.shape()));
        }
        let act = self.activation;
        let dpre = Tensor::new(
            grad_out.shape().to_vec(),
            grad_out
                .data()
                .iter()
                .zip(cache.preact.data())
                .map(|(g, &p)| g * act.deriv(p))
                .collect(),
        )?;
        Ok(LayerGrads {
            params: vec![
                matmul_tn(&cache.input, &dpre)?,
                Tensor::new(vec![self.outputs()], column_sums(&dpre))?,
            ],
            input: matmul_nt(&dpre, &self.weights)?,
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["weights", "bias"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_linear() {
        let layer =
            DenseLayer::from_parts(Tensor::identity(3), Tensor::zeros(&[3]), Activation::Linear).unwrap();
        let x = Tensor::from_rows(&[&[1.0, -2.0, 3.0], &[0.5, 0.0, -1.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn scalar_affine_relu() {
        let layer = DenseLayer::from_parts(
            Tensor::new(vec![1, 1], vec![2.0]).unwrap(),
            Tensor::new(vec![1], vec![1.0]).unwrap(),
            Activation::Relu,
        )
        .unwrap();
        let x = Tensor::new(vec![1, 1], vec![3.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[7.0]);
    }

    #[test]
    fn mismatch_is_dimension_error() {
        let layer = DenseLayer::new(&mut Rng::new(0), 4, 2, Activation::Relu).unwrap();
        assert!(matches!(
            layer.forward(&Tensor::zeros(&[3, 5])),
            Err(PluviaError::Dimension { .. })
        ));
    }
}
