use rand::Rng;

use super::{axpy, softmax, softmax_backward, NeuralError, ParamSet, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Softmax,
}

impl Activation {
    fn apply(self, z: Vec<f64>) -> Vec<f64> {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.into_iter().map(f64::tanh).collect(),
            Activation::Softmax => softmax(&z),
        }
    }

    /// dL/dz from the activation output `y` and dL/dy.
    fn backward(self, y: &[f64], dy: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => dy.to_vec(),
            Activation::Tanh => y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect(),
            Activation::Softmax => softmax_backward(y, dy),
        }
    }
}

/// Fully connected layer `y = act(W·x + b)` with `W: out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let scale = (6.0 / (input + output).max(1) as f64).sqrt();
        Dense {
            weight: Tensor::uniform(&[output, input], scale, rng),
            bias: Tensor::zeros(&[output]),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Dense {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::ShapeMismatch {
                context: "dense input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut z = self.weight.matvec(x);
        axpy(1.0, self.bias.data(), &mut z);
        Ok(self.activation.apply(z))
    }

    /// Accumulates dL/dW and dL/db into `grads` and returns dL/dx.
    ///
    /// `y` must be the output of `forward(x)`.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grads: &mut Dense) -> Vec<f64> {
        let dz = self.activation.backward(y, dy);
        grads.weight.add_outer(&dz, x);
        axpy(1.0, &dz, grads.bias.data_mut());
        self.weight.matvec_t(&dz)
    }
}

impl ParamSet for Dense {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}
