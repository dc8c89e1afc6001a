use serde::{Deserialize, Serialize};

use super::{column_sums, Layer, LayerGrads};
use crate::error::{PluviaError, Result};
use crate::rng::Rng;
use crate::tensor::{glorot_uniform, Activation, Tensor};

/// Causal 1-D convolution with stride 1.
///
/// The input is left-padded with `kernel_size - 1` zeros, so the output has
/// the same length as the input and `y[t]` sees only `x[..=t]`. Tap `k` of
/// the kernel multiplies `x[t - (kernel_size - 1) + k]`; the last tap is the
/// current step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1DLayer {
    /// `kernel_size x in_channels x filters`
    pub kernels: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct Conv1DCache {
    input: Tensor,
    preact: Tensor,
}

impl Conv1DLayer {
    pub fn new(
        rng: &mut Rng,
        kernel_size: usize,
        in_channels: usize,
        filters: usize,
        activation: Activation,
    ) -> Result<Self> {
        let kernels = glorot_uniform(
            rng,
            kernel_size * in_channels,
            kernel_size * filters,
            &[kernel_size, in_channels, filters],
        )?;
        Ok(Conv1DLayer {
            kernels,
            bias: Tensor::zeros(&[filters]),
            activation,
        })
    }

    pub fn from_parts(kernels: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if kernels.shape().len() != 3 || bias.shape() != [kernels.shape()[2]] {
            return Err(PluviaError::dim("conv1d", kernels.shape(), bias.shape()));
        }
        Ok(Conv1DLayer {
            kernels,
            bias,
            activation,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[2]
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() != 2 || input.shape()[1] != self.in_channels() {
            return Err(PluviaError::dim("conv1d", input.shape(), self.kernels.shape()));
        }
        Ok(())
    }
}

impl Layer for Conv1DLayer {
    type Cache = Conv1DCache;

    fn forward_train(&self, input: &Tensor) -> Result<(Tensor, Conv1DCache)> {
        self.check_input(input)?;
        let (steps, cin) = (input.rows(), self.in_channels());
        let (ksize, nf) = (self.kernel_size(), self.filters());
        let w = self.kernels.data();
        let mut pre = vec![0.0; steps * nf];
        for t in 0..steps {
            let out = &mut pre[t * nf..(t + 1) * nf];
            out.copy_from_slice(self.bias.data());
            for k in 0..ksize {
                // Source index t - (ksize - 1) + k; negative means padding.
                let Some(src) = (t + k).checked_sub(ksize - 1) else {
                    continue;
                };
                for (c, &x) in input.row(src).iter().enumerate() {
                    let wrow = &w[(k * cin + c) * nf..(k * cin + c + 1) * nf];
                    for (o, &wv) in out.iter_mut().zip(wrow) {
                        *o += x * wv;
                    }
                }
            }
        }
        let preact = Tensor::new(vec![steps, nf], pre)?;
        let act = self.activation;
        let out = preact.map(|v| act.apply(v));
        Ok((
            out,
            Conv1DCache {
                input: input.clone(),
                preact,
            },
        ))
    }

    fn backward(&self, cache: &Conv1DCache, grad_out: &Tensor) -> Result<LayerGrads> {
        if grad_out.shape() != cache.preact.shape() {
            return Err(PluviaError::dim("conv1d_backward", grad_out.shape(), cache.preact.shape()));
        }
        let (steps, cin) = (cache.input.rows(), self.in_channels());
        let (ksize, nf) = (self.kernel_size(), self.filters());
        let act = self.activation;
        let dpre: Vec<f64> = grad_out
            .data()
            .iter()
            .zip(cache.preact.data())
            .map(|(g, &p)| g * act.deriv(p))
            .collect();
        let w = self.kernels.data();
        let mut dw = vec![0.0; w.len()];
        let mut dx = vec![0.0; steps * cin];
        for t in 0..steps {
            let d = &dpre[t * nf..(t + 1) * nf];
            for k in 0..ksize {
                let Some(src) = (t + k).checked_sub(ksize - 1) else {
                    continue;
                };
                for c in 0..cin {
                    let x = cache.input.at(src, c);
                    let off = (k * cin + c) * nf;
                    let wrow = &w[off..off + nf];
                    let dwrow = &mut dw[off..off + nf];
                    let mut acc = 0.0;
                    for f in 0..nf {
                        dwrow[f] += x * d[f];
                        acc += wrow[f] * d[f];
                    }
                    dx[src * cin + c] += acc;
                }
            }
        }
        let dpre = Tensor::new(vec![steps, nf], dpre)?;
        Ok(LayerGrads {
            params: vec![
                Tensor::new(self.kernels.shape().to_vec(), dw)?,
                Tensor::new(vec![nf], column_sums(&dpre))?,
            ],
            input: Tensor::new(vec![steps, cin], dx)?,
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernels, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["kernels", "bias"]
    }
}
