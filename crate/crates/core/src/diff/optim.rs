//! Adam with optional global-norm gradient clipping.

use super::ndarray::{NdArray, Real};
use super::params::ParamSet;
use crate::error::{Error, Result};

pub struct Adam {
    lr: Real,
    beta1: Real,
    beta2: Real,
    eps: Real,
    step: u64,
    m: Vec<NdArray>,
    v: Vec<NdArray>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: Real) -> Self {
        let m = params.iter().map(|(_, p)| NdArray::zeros(p.value.shape())).collect();
        let v = params.iter().map(|(_, p)| NdArray::zeros(p.value.shape())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m, v }
    }

    pub fn set_lr(&mut self, lr: Real) {
        self.lr = lr;
    }

    /// One update from the accumulated gradients. Moments persist across
    /// steps. A NaN gradient aborts with the offending parameter's name.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        for (i, p) in params.iter_mut().enumerate() {
            if !p.grad.all_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient for parameter {:?}",
                    p.name
                )));
            }
            self.step_one(i, p);
        }
        self.step += 1;
        Ok(())
    }

    fn step_one(&mut self, i: usize, p: &mut super::params::Parameter) {
        let t = (self.step + 1) as Real;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        let m = self.m[i].data_mut();
        let v = self.v[i].data_mut();
        let g = p.grad.data();
        let x = p.value.data_mut();
        for j in 0..x.len() {
            m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
            v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            x[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Scale all gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(params: &mut ParamSet, max_norm: Real) -> Real {
    let mut sq = 0.0;
    for (_, p) in params.iter() {
        sq += p.grad.data().iter().map(|g| g * g).sum::<Real>();
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            for g in p.grad.data_mut() {
                *g *= scale;
            }
        }
    }
    norm
}
