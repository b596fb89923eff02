use rand::Rng;

use super::{axpy, sigmoid, NeuralError, ParamSet, Result, Tensor};

/// Single-layer LSTM. Gates are stacked in the order input, forget, output,
/// candidate inside one `4h × (in + h)` matrix acting on `[x_t; h_{t-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Everything the backward pass needs from a forward run.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    inputs: Vec<Vec<f64>>,
    /// h_0 .. h_T (h_0 = 0).
    hidden: Vec<Vec<f64>>,
    /// c_0 .. c_T (c_0 = 0).
    cells: Vec<Vec<f64>>,
    /// Post-activation gates per step, `[i | f | o | g]`.
    gates: Vec<Vec<f64>>,
}

impl LstmTrace {
    /// h_1 .. h_T.
    pub fn hidden_states(&self) -> &[Vec<f64>] {
        &self.hidden[1..]
    }

    pub fn last_hidden(&self) -> &[f64] {
        self.hidden.last().expect("trace is never empty")
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let scale = (6.0 / (input_dim + 2 * hidden_dim) as f64).sqrt();
        Lstm {
            weight: Tensor::uniform(&[4 * hidden_dim, input_dim + hidden_dim], scale, rng),
            bias: Tensor::zeros(&[4 * hidden_dim]),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Lstm {
            weight: Tensor::zeros(&[4 * hidden_dim, input_dim + hidden_dim]),
            bias: Tensor::zeros(&[4 * hidden_dim]),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.weight.rows() / 4
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols() - self.hidden_dim()
    }

    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<LstmTrace> {
        if inputs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let h = self.hidden_dim();
        let mut trace = LstmTrace {
            inputs: inputs.to_vec(),
            hidden: vec![vec![0.0; h]],
            cells: vec![vec![0.0; h]],
            gates: Vec::with_capacity(inputs.len()),
        };
        let mut xh = Vec::with_capacity(self.weight.cols());
        for x in inputs {
            if x.len() != self.input_dim() {
                return Err(NeuralError::ShapeMismatch {
                    context: "lstm input",
                    expected: self.input_dim(),
                    found: x.len(),
                });
            }
            xh.clear();
            xh.extend_from_slice(x);
            xh.extend_from_slice(trace.hidden.last().unwrap());
            let mut z = self.weight.matvec(&xh);
            axpy(1.0, self.bias.data(), &mut z);
            for v in &mut z[..3 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut z[3 * h..] {
                *v = v.tanh();
            }
            let c_prev = trace.cells.last().unwrap();
            let c: Vec<f64> = (0..h).map(|k| z[h + k] * c_prev[k] + z[k] * z[3 * h + k]).collect();
            let hid: Vec<f64> = (0..h).map(|k| z[2 * h + k] * c[k].tanh()).collect();
            trace.gates.push(z);
            trace.cells.push(c);
            trace.hidden.push(hid);
        }
        Ok(trace)
    }

    /// Backpropagation through time.
    ///
    /// `d_hidden[t]` is dL/dh_{t+1} coming from outside the recurrence. Parameter
    /// gradients are accumulated into `grads`; the returned vectors are dL/dx_t.
    pub fn backward(&self, trace: &LstmTrace, d_hidden: &[Vec<f64>], grads: &mut Lstm) -> Vec<Vec<f64>> {
        let h = self.hidden_dim();
        let n_in = self.input_dim();
        let steps = trace.len();
        debug_assert_eq!(d_hidden.len(), steps);

        let mut dxs = vec![Vec::new(); steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut xh = Vec::with_capacity(self.weight.cols());
        let mut dz = vec![0.0; 4 * h];

        for t in (0..steps).rev() {
            let g = &trace.gates[t];
            let c = &trace.cells[t + 1];
            let c_prev = &trace.cells[t];
            for k in 0..h {
                let (i, f, o, cand) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let dh = d_hidden[t][k] + dh_next[k];
                let tc = c[k].tanh();
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                dz[k] = dc * cand * i * (1.0 - i);
                dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * h + k] = dh * tc * o * (1.0 - o);
                dz[3 * h + k] = dc * i * (1.0 - cand * cand);
                dc_next[k] = dc * f;
            }
            xh.clear();
            xh.extend_from_slice(&trace.inputs[t]);
            xh.extend_from_slice(&trace.hidden[t]);
            grads.weight.add_outer(&dz, &xh);
            axpy(1.0, &dz, grads.bias.data_mut());
            let dxh = self.weight.matvec_t(&dz);
            dh_next.copy_from_slice(&dxh[n_in..]);
            dxs[t] = dxh[..n_in].to_vec();
        }
        dxs
    }

    /// Backward pass when only the final hidden state feeds the loss.
    pub fn backward_last(&self, trace: &LstmTrace, d_last: &[f64], grads: &mut Lstm) -> Vec<Vec<f64>> {
        let h = self.hidden_dim();
        let mut d_hidden = vec![vec![0.0; h]; trace.len()];
        d_hidden.last_mut().unwrap().copy_from_slice(d_last);
        self.backward(trace, &d_hidden, grads)
    }
}

impl ParamSet for Lstm {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}
