//! The layer kinds of the forecaster and the assembled model.
//!
//! Every layer maps a `T x features` sequence to a `T x features'` sequence
//! (the LSTM optionally collapses to its final state). Backward passes are
//! written by hand and return gradients for each parameter tensor in the
//! same order as [`Layer::params`].

mod conv;
mod dense;
mod lstm;
mod model;
mod scale;

pub use conv::{Conv1DCache, Conv1DLayer};
pub use dense::{DenseCache, DenseLayer};
pub use lstm::{Gate, LstmCache, LstmLayer};
pub use model::{CnnLstmModel, ModelCache, ModelConfig};
pub use scale::OutputScaleLayer;

use crate::error::Result;
use crate::tensor::Tensor;

/// Gradients produced by one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    /// Same order as [`Layer::params`].
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

pub trait Layer {
    type Cache;

    fn forward_train(&self, input: &Tensor) -> Result<(Tensor, Self::Cache)>;

    fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.forward_train(input).map(|(out, _)| out)
    }

    fn backward(&self, cache: &Self::Cache, grad_out: &Tensor) -> Result<LayerGrads>;

    fn params(&self) -> Vec<&Tensor>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_names(&self) -> &'static [&'static str];

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Column sums of a `rows x cols` matrix.
pub(crate) fn column_sums(m: &Tensor) -> Vec<f64> {
    let cols = m.cols();
    let mut out = vec![0.0; cols];
    for r in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}
