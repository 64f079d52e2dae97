use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam moments for a fixed list of tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Self {
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    pub fn for_tensors(tensors: &[&mut [T]]) -> Self {
        Self::new(tensors.iter().map(|t| t.len()))
    }

    /// One bias-corrected Adam step. `params` and `grads` must list the same
    /// tensors in the same order as at construction. Nothing is modified
    /// when a gradient is non-finite.
    pub fn update(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>, lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                context: "adam tensor count",
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        for (k, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::ShapeMismatch {
                    context: "adam tensor size",
                    expected: self.m[k].len(),
                    got: p.len(),
                });
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteUpdate);
        }
        self.step += 1;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let one = T::one();
        let c1 = T::lit(1.0 - self.beta1.powi(self.step as i32));
        let c2 = T::lit(1.0 - self.beta2.powi(self.step as i32));
        let eps = T::lit(self.epsilon);
        let lr = T::lit(lr);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn global_norm<T: Scalar>(tensors: &[&[T]]) -> T {
    tensors
        .iter()
        .flat_map(|t| t.iter())
        .map(|&v| v * v)
        .sum::<T>()
        .sqrt()
}

/// Rescales all tensors jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_gradients<T: Scalar>(mut tensors: Vec<&mut [T]>, max_norm: T) -> T {
    let norm = {
        let views: Vec<&[T]> = tensors.iter().map(|t| &**t).collect();
        global_norm(&views)
    };
    if norm > max_norm {
        let s = max_norm / norm;
        for t in tensors.iter_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

/// Step decay: `lr₀ · decay^⌊step / interval⌋`.
pub fn lr_schedule(step: u64, initial: f64, decay: f64, interval: u64) -> f64 {
    initial * decay.powi((step / interval.max(1)) as i32)
}
