use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamSet;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates sampled per tensor; `None` checks all of them.
    pub max_coords_per_tensor: Option<usize>,
    pub seed: u64,
    /// Denominator floor of the relative error, so coordinates whose true
    /// gradient is ~0 are compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            max_coords_per_tensor: Some(40),
            seed: 0,
            floor: 1e-6,
        }
    }
}

impl GradCheckConfig {
    pub fn exhaustive() -> Self {
        GradCheckConfig {
            max_coords_per_tensor: None,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares `analytic` against central finite differences of `loss` around
/// `params`: `|a − n| / max(|a|, |n|, floor)`, maximised over the checked
/// coordinates.
pub fn grad_check<P, F>(mut loss: F, params: &P, analytic: &P, config: &GradCheckConfig) -> GradCheckReport
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (k, (name, g)) in analytic.tensors().into_iter().enumerate() {
        let len = g.len();
        let coords: Vec<usize> = match config.max_coords_per_tensor {
            Some(m) if m < len => {
                let mut c = sample(&mut rng, len, m).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..len).collect(),
        };
        for idx in coords {
            let original = probe.tensors()[k].1.data()[idx];
            probe.tensors_mut()[k].1.data_mut()[idx] = original + config.step;
            let plus = loss(&probe);
            probe.tensors_mut()[k].1.data_mut()[idx] = original - config.step;
            let minus = loss(&probe);
            probe.tensors_mut()[k].1.data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * config.step);
            let a = g.data()[idx];
            let denom = a.abs().max(numeric.abs()).max(config.floor);
            let err = (a - numeric).abs() / denom;
            report.checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                report.worst = Some((name.to_string(), idx));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Tensor;

    fn half_sq_norm(t: &Tensor) -> f64 {
        0.5 * t.data().iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::from_vec(&[4], vec![0.3, -1.2, 2.5, 0.0]).unwrap();
        let grad = x.clone();
        let r = grad_check(half_sq_norm, &x, &grad, &GradCheckConfig::exhaustive());
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let x = Tensor::from_vec(&[4], vec![0.3, -1.2, 2.5, 0.7]).unwrap();
        let mut grad = x.clone();
        grad.data_mut()[2] *= 1.5;
        let r = grad_check(half_sq_norm, &x, &grad, &GradCheckConfig::exhaustive());
        assert!(r.max_rel_error > 0.1, "{r:?}");
        assert_eq!(r.worst, Some(("tensor".to_string(), 2)));
    }

    #[test]
    fn sampling_limits_coordinates() {
        let x = Tensor::zeros(&[100]);
        let cfg = GradCheckConfig {
            max_coords_per_tensor: Some(7),
            ..Default::default()
        };
        let r = grad_check(half_sq_norm, &x, &x.clone(), &cfg);
        assert_eq!(r.checked, 7);
    }
}
