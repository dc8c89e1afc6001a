//! Finite-difference verification of every hand-written backward pass.
//!
//! Each check draws a small random layer and input, contracts the output with
//! a random probe `R` to get the scalar `L = Σ out ⊙ R`, and compares the
//! analytic gradients from `backward(R)` with central differences of `L`.

use crate::error::Result;
use crate::layers::{Conv1DLayer, DenseLayer, Layer, LstmLayer, OutputScaleLayer};
use crate::rng::Rng;
use crate::tensor::{finite_diff_grad, max_relative_error, Activation, Tensor};
use crate::training::{huber_grad, huber_loss};

pub const FD_EPS: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-4;

/// Relu inputs closer than this to the kink are redrawn; central
/// differences are meaningless across it.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckedLayer {
    Conv1D,
    Lstm,
    Dense,
    OutputScale,
    Huber,
}

impl CheckedLayer {
    pub const ALL: [CheckedLayer; 5] = [
        CheckedLayer::Conv1D,
        CheckedLayer::Lstm,
        CheckedLayer::Dense,
        CheckedLayer::OutputScale,
        CheckedLayer::Huber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckedLayer::Conv1D => "conv1d",
            CheckedLayer::Lstm => "lstm",
            CheckedLayer::Dense => "dense",
            CheckedLayer::OutputScale => "output_scale",
            CheckedLayer::Huber => "huber",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub layer: CheckedLayer,
    pub cases: usize,
    pub max_rel_err: f64,
}

impl GradcheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_err < MAX_REL_ERR
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub cases: usize,
    /// Perturb the analytic gradients before comparing. Negative control only.
    pub corrupt_backward: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            seed: 0,
            cases: 100,
            corrupt_backward: false,
        }
    }
}

fn random(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.uniform(lo, hi)).collect()).expect("shape")
}

fn size(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

fn contract(out: &Tensor, probe: &Tensor) -> f64 {
    out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

/// Max relative error over the input and every parameter of `layer`.
fn check_layer<L: Layer + Clone>(layer: &L, input: &Tensor, rng: &mut Rng, corrupt: bool) -> Result<f64> {
    let (out, cache) = layer.forward_train(input)?;
    let probe = random(rng, out.shape(), -1.0, 1.0);
    let mut grads = layer.backward(&cache, &probe)?;
    if corrupt {
        grads.input = corrupt_tensor(&grads.input);
        for g in &mut grads.params {
            *g = corrupt_tensor(g);
        }
    }

    let objective = |l: &L, x: &Tensor| contract(&l.forward(x).expect("forward"), &probe);
    let numeric = finite_diff_grad(|x| objective(layer, x), input, FD_EPS)?;
    let mut worst = max_relative_error(&grads.input, &numeric)?;

    for (i, analytic) in grads.params.iter().enumerate() {
        let base = layer.params()[i].clone();
        let numeric = finite_diff_grad(
            |p| {
                let mut probe_layer = layer.clone();
                *probe_layer.params_mut()[i] = p.clone();
                objective(&probe_layer, input)
            },
            &base,
            FD_EPS,
        )?;
        worst = worst.max(max_relative_error(analytic, &numeric)?);
    }
    Ok(worst)
}

fn min_abs(t: &Tensor) -> f64 {
    t.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

fn corrupt_tensor(t: &Tensor) -> Tensor {
    t.map(corrupt_value)
}

fn corrupt_value(v: f64) -> f64 {
    v * 1.01 + 1e-3
}

fn conv_case(rng: &mut Rng, corrupt: bool) -> Result<f64> {
    loop {
        let steps = size(rng, 1, 8);
        let cin = size(rng, 1, 3);
        let filters = size(rng, 1, 4);
        let ksize = size(rng, 1, 5);
        let mut layer = Conv1DLayer::new(rng, ksize, cin, filters, Activation::Relu)?;
        layer.bias = random(rng, &[filters], -0.5, 0.5);
        let input = random(rng, &[steps, cin], -1.0, 1.0);
        let linear = Conv1DLayer {
            activation: Activation::Linear,
            ..layer.clone()
        };
        if min_abs(&linear.forward(&input)?) < KINK_MARGIN {
            continue;
        }
        return check_layer(&layer, &input, rng, corrupt);
    }
}

fn lstm_case(rng: &mut Rng, corrupt: bool) -> Result<f64> {
    let steps = size(rng, 1, 6);
    let features = size(rng, 1, 4);
    let units = size(rng, 1, 5);
    let seq = rng.below(2) == 0;
    let mut layer = LstmLayer::new(rng, features, units, seq)?;
    layer.bias = random(rng, &[4 * units], -0.5, 0.5);
    let input = random(rng, &[steps, features], -1.0, 1.0);
    check_layer(&layer, &input, rng, corrupt)
}

fn dense_case(rng: &mut Rng, corrupt: bool) -> Result<f64> {
    loop {
        let rows = size(rng, 1, 6);
        let inputs = size(rng, 1, 6);
        let outputs = size(rng, 1, 4);
        let activation = if rng.below(2) == 0 {
            Activation::Relu
        } else {
            Activation::Linear
        };
        let mut layer = DenseLayer::new(rng, inputs, outputs, activation)?;
        layer.bias = random(rng, &[outputs], -0.5, 0.5);
        let input = random(rng, &[rows, inputs], -1.0, 1.0);
        let linear = DenseLayer {
            activation: Activation::Linear,
            ..layer.clone()
        };
        if activation == Activation::Relu
            && min_abs(&linear.forward(&input)?) < KINK_MARGIN
        {
            continue;
        }
        return check_layer(&layer, &input, rng, corrupt);
    }
}

fn scale_case(rng: &mut Rng, corrupt: bool) -> Result<f64> {
    let layer = OutputScaleLayer::new(rng.uniform(0.5, 700.0))?;
    let steps = size(rng, 1, 8);
    let input = random(rng, &[steps, 1], -1.0, 1.0);
    check_layer(&layer, &input, rng, corrupt)
}

fn huber_case(rng: &mut Rng, corrupt: bool) -> Result<f64> {
    let delta = rng.uniform(0.1, 5.0);
    let y = rng.uniform(-50.0, 50.0);
    let residual = loop {
        let r = rng.uniform(-10.0, 10.0);
        // Huber is not twice differentiable at |r| = delta.
        if (r.abs() - delta).abs() > KINK_MARGIN {
            break r;
        }
    };
    let x = Tensor::new(vec![1], vec![y + residual])?;
    let mut analytic = huber_grad(y, y + residual, delta);
    if corrupt {
        analytic = corrupt_value(analytic);
    }
    let numeric = finite_diff_grad(|t| huber_loss(y, t.data()[0], delta), &x, FD_EPS)?;
    max_relative_error(&Tensor::new(vec![1], vec![analytic])?, &numeric)
}

/// Run `cases` random checks per layer kind.
pub fn run_gradcheck(options: &GradcheckOptions) -> Result<Vec<GradcheckRow>> {
    CheckedLayer::ALL
        .iter()
        .enumerate()
        .map(|(k, &layer)| {
            let mut rng = Rng::new(options.seed ^ (0x5DEE_CE66 * (k as u64 + 1)));
            let mut worst: f64 = 0.0;
            for _ in 0..options.cases {
                let case = match layer {
                    CheckedLayer::Conv1D => conv_case(&mut rng, options.corrupt_backward)?,
                    CheckedLayer::Lstm => lstm_case(&mut rng, options.corrupt_backward)?,
                    CheckedLayer::Dense => dense_case(&mut rng, options.corrupt_backward)?,
                    CheckedLayer::OutputScale => scale_case(&mut rng, options.corrupt_backward)?,
                    CheckedLayer::Huber => huber_case(&mut rng, options.corrupt_backward)?,
                };
                worst = worst.max(case);
            }
            Ok(GradcheckRow {
                layer,
                cases: options.cases,
                max_rel_err: worst,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_layers_pass() {
        let rows = run_gradcheck(&GradcheckOptions {
            cases: 20,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(rows.len(), 5);
        for row in rows {
            assert!(row.passed(), "{} {}", row.layer.name(), row.max_rel_err);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let rows = run_gradcheck(&GradcheckOptions {
            cases: 5,
            corrupt_backward: true,
            ..Default::default()
        })
        .unwrap();
        assert!(rows.iter().all(|r| !r.passed()));
    }
}
