use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment accumulators, one buffer per parameter segment.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new<P: Parameters + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = params.segments().iter().map(|s| s.len()).collect();
        OptimizerState {
            config,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

fn check_shapes(a: &[usize], b: &[usize], what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// One bias-corrected Adam update of `params` along `-grads`.
pub fn adam_step<P, G>(params: &mut P, grads: &G, state: &mut OptimizerState) -> Result<()>
where
    P: Parameters + ?Sized,
    G: Parameters + ?Sized,
{
    let g = grads.segments();
    let param_shapes: Vec<usize> = params.segments().iter().map(|s| s.len()).collect();
    let grad_shapes: Vec<usize> = g.iter().map(|s| s.len()).collect();
    let moment_shapes: Vec<usize> = state.first.iter().map(|s| s.len()).collect();
    check_shapes(&param_shapes, &grad_shapes, "parameters vs gradients")?;
    check_shapes(&param_shapes, &moment_shapes, "parameters vs optimizer moments")?;

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params
        .segments_mut()
        .into_iter()
        .zip(g)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    params.mark_updated();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);

    impl Parameters for Scalar {
        fn segments(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn segments_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Scalar(vec![1.0, -2.0]);
        let mut s = OptimizerState::new(&p, AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut p, &Scalar(vec![0.0, 0.0]), &mut s).unwrap();
        }
        assert_eq!(p.0, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_is_sign_step_of_size_lr() {
        // m_hat = g, v_hat = g^2, so update = lr * g / (|g| + eps).
        for g in [1e-3, 0.5, 250.0, -7.0] {
            let mut p = Scalar(vec![0.0]);
            let mut s = OptimizerState::new(&p, AdamConfig::default());
            adam_step(&mut p, &Scalar(vec![g]), &mut s).unwrap();
            let expected = -1e-4 * g / (g.abs() + 1e-8);
            assert!((p.0[0] - expected).abs() < 1e-18, "g={g}: {}", p.0[0]);
            assert!((p.0[0].abs() - 1e-4).abs() < 1e-4 * 1e-5);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Scalar(vec![0.0; 2]);
        let mut s = OptimizerState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &Scalar(vec![0.0; 3]), &mut s).is_err());
    }
}
