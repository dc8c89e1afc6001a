//! Monthly precipitation forecasting with a causal-convolution + LSTM network.
//!
//! Everything is `f64`, single-threaded and seeded, so a run is reproducible
//! bit for bit. The crate is organised bottom-up:
//!
//! - [`tensor`] and [`rng`]: dense arrays, activations, initialisation and a
//!   finite-difference gradient helper.
//! - [`layers`]: causal Conv1D, LSTM, Dense and output scaling, each with a
//!   hand-derived backward pass, plus the assembled [`CnnLstmModel`].
//! - [`dataset`]: CSV ingestion, sentinel cleaning, chronological splits,
//!   sliding windows and monthly statistics.
//! - [`training`]: Huber loss, Adam and the minibatch loop.
//! - [`evaluation`]: MSE/RMSE, climatology and persistence baselines and
//!   walk-forward scoring.
//! - [`gradcheck`]: finite-difference verification of every backward pass.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod layers;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{PluviaError, Result};
pub use layers::{CnnLstmModel, ModelConfig};
pub use rng::Rng;
pub use tensor::Tensor;
