use serde::{Deserialize, Serialize};

use super::{column_sums, Layer, LayerGrads};
use crate::error::{PluviaError, Result};
use crate::rng::Rng;
use crate::tensor::{dot, glorot_uniform, matmul, matmul_nt, matmul_tn, sigmoid, Tensor};

/// Gate blocks, in the order they are packed along the `4 * units` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];
}

/// Single-direction LSTM with zero initial state.
///
/// ```text
/// f_t = σ(x_t W_f + h_{t-1} U_f + b_f)
/// i_t = σ(x_t W_i + h_{t-1} U_i + b_i)
/// g_t = tanh(x_t W_g + h_{t-1} U_g + b_g)
/// o_t = σ(x_t W_o + h_{t-1} U_o + b_o)
/// c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
/// h_t = o_t ⊙ tanh(c_t)
/// ```
///
/// The four per-gate matrices are stored side by side: `input_weights` is
/// `features x 4*units`, `recurrent_weights` is `units x 4*units` and `bias`
/// is `4*units`, each laid out as `[forget | input | candidate | output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input_weights: Tensor,
    pub recurrent_weights: Tensor,
    pub bias: Tensor,
    pub return_sequences: bool,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    /// Activated gate values per step, `T x 4H` in gate order.
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden: Vec<f64>,
}

impl LstmLayer {
    pub fn new(rng: &mut Rng, features: usize, units: usize, return_sequences: bool) -> Result<Self> {
        let input_weights = glorot_uniform(rng, features, 4 * units, &[features, 4 * units])?;
        let recurrent_weights = glorot_uniform(rng, units, 4 * units, &[units, 4 * units])?;
        Ok(LstmLayer {
            input_weights,
            recurrent_weights,
            bias: Tensor::zeros(&[4 * units]),
            return_sequences,
        })
    }

    pub fn zeros(features: usize, units: usize, return_sequences: bool) -> Self {
        LstmLayer {
            input_weights: Tensor::zeros(&[features, 4 * units]),
            recurrent_weights: Tensor::zeros(&[units, 4 * units]),
            bias: Tensor::zeros(&[4 * units]),
            return_sequences,
        }
    }

    pub fn features(&self) -> usize {
        self.input_weights.shape()[0]
    }

    pub fn units(&self) -> usize {
        self.recurrent_weights.shape()[0]
    }

    /// Copy of one gate's `(W, U, b)` block.
    pub fn gate_block(&self, gate: Gate) -> (Tensor, Tensor, Tensor) {
        let h = self.units();
        let off = gate as usize * h;
        let slice = |m: &Tensor| {
            let rows = m.rows();
            let data = (0..rows)
                .flat_map(|r| m.row(r)[off..off + h].iter().copied())
                .collect();
            Tensor::new(vec![rows, h], data).expect("gate block shape")
        };
        let bias = Tensor::new(vec![h], self.bias.data()[off..off + h].to_vec()).expect("gate bias");
        (slice(&self.input_weights), slice(&self.recurrent_weights), bias)
    }

    /// Overwrite one gate's block.
    pub fn set_gate_block(&mut self, gate: Gate, w: &Tensor, u: &Tensor, b: &Tensor) -> Result<()> {
        let (f, h) = (self.features(), self.units());
        if w.shape() != [f, h] || u.shape() != [h, h] || b.shape() != [h] {
            return Err(PluviaError::dim("lstm_gate", w.shape(), &[f, h]));
        }
        let off = gate as usize * h;
        for r in 0..f {
            self.input_weights.data_mut()[r * 4 * h + off..r * 4 * h + off + h].copy_from_slice(w.row(r));
        }
        for r in 0..h {
            self.recurrent_weights.data_mut()[r * 4 * h + off..r * 4 * h + off + h]
                .copy_from_slice(u.row(r));
        }
        self.bias.data_mut()[off..off + h].copy_from_slice(b.data());
        Ok(())
    }
}

impl Layer for LstmLayer {
    type Cache = LstmCache;

    fn forward_train(&self, input: &Tensor) -> Result<(Tensor, LstmCache)> {
        if input.shape().len() != 2 || input.shape()[1] != self.features() {
            return Err(PluviaError::dim("lstm", input.shape(), self.input_weights.shape()));
        }
        let steps = input.rows();
        let h = self.units();
        let g4 = 4 * h;
        let mut gates = matmul(input, &self.input_weights)?.into_data();
        let mut cells = vec![0.0; steps * h];
        let mut tanh_cells = vec![0.0; steps * h];
        let mut hidden = vec![0.0; steps * h];
        let u = self.recurrent_weights.data();

        for t in 0..steps {
            let z = &mut gates[t * g4..(t + 1) * g4];
            for (zv, b) in z.iter_mut().zip(self.bias.data()) {
                *zv += b;
            }
            if t > 0 {
                let hprev = &hidden[(t - 1) * h..t * h];
                for (k, &hk) in hprev.iter().enumerate() {
                    let urow = &u[k * g4..(k + 1) * g4];
                    for (zv, &uv) in z.iter_mut().zip(urow) {
                        *zv += hk * uv;
                    }
                }
            }
            for j in 0..h {
                let f = sigmoid(z[j]);
                let i = sigmoid(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sigmoid(z[3 * h + j]);
                z[j] = f;
                z[h + j] = i;
                z[2 * h + j] = g;
                z[3 * h + j] = o;
                let cprev = if t > 0 { cells[(t - 1) * h + j] } else { 0.0 };
                let c = f * cprev + i * g;
                let tc = c.tanh();
                cells[t * h + j] = c;
                tanh_cells[t * h + j] = tc;
                hidden[t * h + j] = o * tc;
            }
        }

        let out = if self.return_sequences {
            Tensor::new(vec![steps, h], hidden.clone())?
        } else {
            Tensor::new(vec![h], hidden[(steps - 1) * h..].to_vec())?
        };
        Ok((
            out,
            LstmCache {
                input: input.clone(),
                gates,
                cells,
                tanh_cells,
                hidden,
            },
        ))
    }

    fn backward(&self, cache: &LstmCache, grad_out: &Tensor) -> Result<LayerGrads> {
        let steps = cache.input.rows();
        let h = self.units();
        let g4 = 4 * h;
        let expected: &[usize] = if self.return_sequences { &[steps, h] } else { &[h] };
        let ok = grad_out.shape() == expected
            || (!self.return_sequences && grad_out.shape() == [1, h]);
        if !ok || cache.gates.len() != steps * g4 {
            return Err(PluviaError::dim("lstm_backward", grad_out.shape(), expected));
        }
        let upstream = |t: usize, j: usize| -> f64 {
            if self.return_sequences {
                grad_out.data()[t * h + j]
            } else if t == steps - 1 {
                grad_out.data()[j]
            } else {
                0.0
            }
        };

        let u = self.recurrent_weights.data();
        let mut dz = vec![0.0; steps * g4];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let gt = &cache.gates[t * g4..(t + 1) * g4];
            let dzt = &mut dz[t * g4..(t + 1) * g4];
            for j in 0..h {
                let (f, i, g, o) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let tc = cache.tanh_cells[t * h + j];
                let cprev = if t > 0 { cache.cells[(t - 1) * h + j] } else { 0.0 };
                let dh = upstream(t, j) + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                dc_next[j] = dc * f;
                dzt[j] = dc * cprev * f * (1.0 - f);
                dzt[h + j] = dc * g * i * (1.0 - i);
                dzt[2 * h + j] = dc * i * (1.0 - g * g);
                dzt[3 * h + j] = d_o * o * (1.0 - o);
            }
            for (k, d) in dh_next.iter_mut().enumerate() {
                *d = dot(&u[k * g4..(k + 1) * g4], dzt);
            }
        }

        let dz = Tensor::new(vec![steps, g4], dz)?;
        // Row t holds h_{t-1}; row 0 is the zero initial state.
        let mut hprev = vec![0.0; steps * h];
        hprev[h..].copy_from_slice(&cache.hidden[..(steps - 1) * h]);
        let hprev = Tensor::new(vec![steps, h], hprev)?;

        Ok(LayerGrads {
            params: vec![
                matmul_tn(&cache.input, &dz)?,
                matmul_tn(&hprev, &dz)?,
                Tensor::new(vec![g4], column_sums(&dz))?,
            ],
            input: matmul_nt(&dz, &self.input_weights)?,
        })
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.input_weights, &mut self.recurrent_weights, &mut self.bias]
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["input_weights", "recurrent_weights", "bias"]
    }
}
