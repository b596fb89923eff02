//! Minimal differentiable building blocks.
//!
//! Everything here works on `f64` row-major buffers. Layers expose a forward
//! pass plus a hand-written backward pass that *accumulates* into a gradient
//! value of the same type, so a mini-batch can be reduced in a fixed order.

mod adam;
mod checkpoint;
mod dense;
mod gradcheck;
mod lstm;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, restore, save_checkpoint, Checkpoint};
pub use dense::{Activation, Dense};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use lstm::{Lstm, LstmTrace};

use std::ops::Range;

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("gold index {gold} out of range for {k} classes")]
    GoldOutOfRange { gold: usize, k: usize },
    #[error("output is not a probability distribution (sum = {sum})")]
    NotADistribution { sum: f64 },
    #[error("non-finite gradient in parameter `{param}` at index {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

/// Dense n-dimensional array of `f64` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NeuralError::BadShape {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Uniform initialisation in `[-scale, scale]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], scale: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Width of a row; 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    /// `self · x` for a rows × cols matrix.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols());
        (0..self.rows()).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y` for a rows × cols matrix.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows());
        let mut out = vec![0.0; self.cols()];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                axpy(yr, self.row(r), &mut out);
            }
        }
        out
    }

    /// `self += a · bᵀ`.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows());
        debug_assert_eq!(b.len(), self.cols());
        for (r, &ar) in a.iter().enumerate() {
            if ar != 0.0 {
                axpy(ar, b, self.row_mut(r));
            }
        }
    }
}

/// A model's collection of named trainable tensors.
///
/// Gradients are represented by a value of the same type, so Adam, gradient
/// checking and checkpointing can all walk the tensors by name.
pub trait ParamSet {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)>;

    /// Same structure with every component zeroed.
    fn zeros_like(&self) -> Self
    where
        Self: Sized + Clone,
    {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, b.data(), a.data_mut());
        }
    }

    fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    /// SHA-256 over names, shapes and the little-endian `f64` bytes.
    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.tensors() {
            h.update(name.as_bytes());
            for d in t.shape() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl ParamSet for Tensor {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("tensor", self)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("tensor", self)]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Backward pass of softmax: given `y = softmax(z)` and `dL/dy`, returns `dL/dz`.
pub fn softmax_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    let inner = dot(dy, y);
    y.iter().zip(dy).map(|(yi, dyi)| yi * (dyi - inner)).collect()
}

/// Index of the largest component; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

const PROB_FLOOR: f64 = 1e-12;

/// Negative log-likelihood of `gold` under the distribution `o`, and its
/// gradient with respect to `o`.
pub fn cross_entropy(o: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if gold >= o.len() {
        return Err(NeuralError::GoldOutOfRange { gold, k: o.len() });
    }
    let sum: f64 = o.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(NeuralError::NotADistribution { sum });
    }
    let p = o[gold].max(PROB_FLOOR);
    let mut grad = vec![0.0; o.len()];
    grad[gold] = -1.0 / p;
    Ok((-p.ln(), grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Zeroes each slot of `x` independently with probability `p` in training
/// mode. Returns which slots were dropped.
pub fn word_dropout<R: Rng + ?Sized>(
    x: &mut [f64],
    slots: &[Range<usize>],
    p: f64,
    rng: &mut R,
    mode: Mode,
) -> Vec<bool> {
    debug_assert!((0.0..1.0).contains(&p));
    if mode == Mode::Eval || p == 0.0 {
        return vec![false; slots.len()];
    }
    slots
        .iter()
        .map(|slot| {
            let drop = rng.gen::<f64>() < p;
            if drop {
                x[slot.clone()].iter_mut().for_each(|v| *v = 0.0);
            }
            drop
        })
        .collect()
}
