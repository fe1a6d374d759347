use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Plain SGD or Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, lr)
    }

    /// Descends along `grads`. Refuses non-finite gradients and leaves the
    /// parameters untouched in that case.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.param_slices();
        if let Some(bad) = g.iter().flat_map(|s| s.iter()).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {bad}")));
        }
        let p = params.param_slices_mut();
        if p.len() != g.len() || p.iter().zip(&g).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape {
                what: "gradient",
                expected: p.iter().map(|s| s.len()).sum(),
                got: g.iter().map(|s| s.len()).sum(),
            });
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (ps, gs) in p.into_iter().zip(g) {
                    ps.iter_mut().zip(gs).for_each(|(x, d)| *x -= self.lr * d);
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = g.iter().map(|s| vec![0.0; s.len()]).collect();
                    self.v = self.m.clone();
                }
                self.t += 1;
                let bc1 = 1.0 - self.beta1.powi(self.t as i32);
                let bc2 = 1.0 - self.beta2.powi(self.t as i32);
                for (k, (ps, gs)) in p.into_iter().zip(g).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for j in 0..ps.len() {
                        m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gs[j];
                        v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gs[j] * gs[j];
                        ps[j] -= self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
