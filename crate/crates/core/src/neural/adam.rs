use super::{NeuralError, ParamSet, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
///
/// Moment buffers are created on the first step and follow the order of
/// [`ParamSet::tensors`].
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        for (name, g) in &grads {
            if let Some(index) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(NeuralError::NonFiniteGradient {
                    param: name.to_string(),
                    index,
                });
            }
        }
        let mut params = params.tensors_mut();
        if self.first.is_empty() {
            self.first = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
            self.second = self.first.clone();
        }
        for (k, ((_, p), (_, g))) in params.iter().zip(&grads).enumerate() {
            if p.len() != g.len() || self.first[k].len() != p.len() {
                return Err(NeuralError::ShapeMismatch {
                    context: "adam parameter",
                    expected: p.len(),
                    found: g.len(),
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (k, ((_, p), (_, g))) in params.iter_mut().zip(&grads).enumerate() {
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
