//! Huber loss, Adam, the staircase learning-rate schedule and the
//! minibatch training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{PluviaError, Result};
use crate::layers::CnnLstmModel;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Huber loss of the residual `yhat - y`.
pub fn huber_loss(y: f64, yhat: f64, delta: f64) -> f64 {
    let r = yhat - y;
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

/// `d huber_loss / d yhat`: the residual clipped to `[-delta, delta]`.
pub fn huber_grad(y: f64, yhat: f64, delta: f64) -> f64 {
    (yhat - y).clamp(-delta, delta)
}

/// `rate(e) = initial * factor^floor(e / period)`, epochs counted from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub factor: f64,
    pub period: usize,
}

impl LrSchedule {
    /// Starts at 1e-8 and grows tenfold every 20 epochs.
    pub fn published() -> Self {
        LrSchedule {
            initial: 1e-8,
            factor: 10.0,
            period: 20,
        }
    }

    pub fn constant(rate: f64) -> Self {
        LrSchedule {
            initial: rate,
            factor: 1.0,
            period: 1,
        }
    }

    pub fn rate(&self, epoch: usize) -> f64 {
        let steps = (epoch / self.period) as i32;
        // Repeated multiplication would drift; powi keeps 1e-8 * 10 == 1e-7.
        self.initial * self.factor.powi(steps)
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self::published()
    }
}

pub fn lr_at_epoch(schedule: &LrSchedule, epoch: usize) -> f64 {
    schedule.rate(epoch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments per parameter tensor, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update over every tensor, in slice order:
///
/// ```text
/// m ← β1 m + (1 − β1) g
/// v ← β2 v + (1 − β2) g²
/// θ ← θ − lr · m̂ / (√v̂ + ε),  m̂ = m / (1 − β1^t),  v̂ = v / (1 − β2^t)
/// ```
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(PluviaError::dim(
            "adam_step",
            &[params.len()],
            &[grads.len(), state.m.len()],
        ));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(PluviaError::dim("adam_step", p.shape(), g.shape()));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, eps) = (config.beta1, config.beta2, config.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let pd = p.data_mut();
        for (((pi, &gi), mi), vi) in pd
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *pi -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub huber_delta: f64,
    pub adam: AdamConfig,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub window_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Reshuffle window order every epoch.
    pub shuffle: bool,
    /// Score every timestep against the following month instead of only the
    /// final forecast.
    pub sequence_loss: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            huber_delta: 1.0,
            adam: AdamConfig::default(),
            schedule: LrSchedule::published(),
            batch_size: 256,
            window_size: 64,
            epochs: 50,
            seed: 0,
            shuffle: true,
            sequence_loss: false,
        }
    }
}

impl TrainingConfig {
    /// The published configuration.
    pub fn published() -> Self {
        Self::default()
    }

    /// Same as [`TrainingConfig::published`] but with a constant 1e-3 rate, for
    /// runs that are expected to converge.
    pub fn practical() -> Self {
        TrainingConfig {
            schedule: LrSchedule::constant(1e-3),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("training.batch_size must be at least 1".to_string());
        }
        if self.epochs == 0 {
            problems.push("training.epochs must be at least 1".to_string());
        }
        if self.window_size == 0 {
            problems.push("training.window_size must be at least 1".to_string());
        }
        if !(self.huber_delta > 0.0) {
            problems.push(format!("training.huber_delta must be positive, got {}", self.huber_delta));
        }
        if self.schedule.period == 0 {
            problems.push("training.schedule.period must be at least 1".to_string());
        }
        if !(self.schedule.initial >= 0.0 && self.schedule.factor > 0.0) {
            problems.push("training.schedule needs initial >= 0 and factor > 0".to_string());
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            problems.push("training.adam needs betas in [0, 1) and epsilon > 0".to_string());
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-window Huber loss over the epoch, in millimetre units.
    pub loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Loss and output gradient for one window's prediction.
fn window_loss(
    output: &Tensor,
    target: f64,
    next_values: &[f64],
    config: &TrainingConfig,
) -> (f64, Tensor) {
    let delta = config.huber_delta;
    let mut grad = Tensor::zeros(output.shape());
    let steps = output.len();
    if config.sequence_loss && steps == next_values.len() {
        let mut loss = 0.0;
        for (t, (&yhat, &y)) in output.data().iter().zip(next_values).enumerate() {
            loss += huber_loss(y, yhat, delta);
            grad.data_mut()[t] = huber_grad(y, yhat, delta) / steps as f64;
        }
        (loss / steps as f64, grad)
    } else {
        let yhat = output.data()[steps - 1];
        grad.data_mut()[steps - 1] = huber_grad(target, yhat, delta);
        (huber_loss(target, yhat, delta), grad)
    }
}

/// Fit `model` to `dataset` in place and return the per-epoch history.
///
/// Each epoch optionally reshuffles the windows (seeded by `config.seed`),
/// walks them in batches of `batch_size` (the last batch may be short),
/// averages loss and gradients over the batch and applies one Adam step at
/// the epoch's scheduled rate. `progress` sees every finished epoch.
pub fn train(
    model: &mut CnnLstmModel,
    dataset: &WindowedDataset,
    config: &TrainingConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainingHistory> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(PluviaError::Parameter(problems.join("; ")));
    }
    if dataset.is_empty() {
        return Err(PluviaError::Training("training dataset has no windows".into()));
    }
    if dataset.window_size != model.window_size() || config.window_size != model.window_size() {
        return Err(PluviaError::Training(format!(
            "window size mismatch: model {}, dataset {}, config {}",
            model.window_size(),
            dataset.window_size,
            config.window_size
        )));
    }

    let mut rng = Rng::new(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut adam = AdamState::new(&model.params());
    let mut history = TrainingHistory::default();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        if config.shuffle {
            rng.shuffle(&mut order);
        }
        let lr = lr_at_epoch(&config.schedule, epoch);
        let mut epoch_loss = 0.0;

        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads: Vec<Tensor> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let w = &dataset.windows[idx];
                let (out, cache) = model.forward_train(&w.input)?;
                let (loss, grad_out) = window_loss(&out, w.target, &w.next_values, config);
                batch_loss += loss;
                let g = model.backward(&cache, &grad_out)?;
                for (acc, gi) in grads.iter_mut().zip(&g.params) {
                    acc.add_assign(gi)?;
                }
            }
            if !batch_loss.is_finite() {
                return Err(PluviaError::Numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += batch_loss;
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g.data_mut() {
                    *v *= inv;
                }
            }
            adam_step(&mut model.params_mut(), &grads, &mut adam, lr, &config.adam)?;
        }

        let record = EpochRecord {
            epoch,
            loss: epoch_loss / dataset.len() as f64,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        progress(&record);
        history.epochs.push(record);
    }
    Ok(history)
}
