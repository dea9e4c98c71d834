//! Parameter-update rules applied to the combined gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(dim: usize) -> Adam {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: grad.len(),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(Adam),
    Sgd,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize) -> Optimizer {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(dim)),
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        match self {
            Optimizer::Adam(adam) => adam.step(params, grad, lr),
            Optimizer::Sgd => {
                if params.len() != grad.len() {
                    return Err(Error::DimensionMismatch {
                        expected: params.len(),
                        got: grad.len(),
                    });
                }
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_by_roughly_lr() {
        let mut adam = Adam::new(2);
        let mut params = vec![1.0, -2.0];
        adam.step(&mut params, &[0.3, -0.7], 0.01).unwrap();
        // bias-corrected m/sqrt(v) is sign(g) on step one
        assert!((params[0] - (1.0 - 0.01)).abs() < 1e-6);
        assert!((params[1] - (-2.0 + 0.01)).abs() < 1e-6);
    }

    #[test]
    fn adam_converges_on_a_quadratic() {
        let target = [3.0, -1.5, 0.25];
        let mut params = vec![0.0; 3];
        let mut adam = Adam::new(3);
        for _ in 0..2000 {
            let grad: Vec<f64> = params
                .iter()
                .zip(&target)
                .map(|(p, t)| 2.0 * (p - t))
                .collect();
            adam.step(&mut params, &grad, 0.01).unwrap();
        }
        for (p, t) in params.iter().zip(&target) {
            assert!((p - t).abs() < 1e-3);
        }
    }

    #[test]
    fn sgd_is_a_plain_update() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 2);
        let mut params = vec![1.0, 1.0];
        opt.step(&mut params, &[0.5, -0.25], 0.1).unwrap();
        assert_eq!(params, vec![1.0 - 0.05, 1.0 + 0.025]);
    }
}
