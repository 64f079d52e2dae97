//! Feature-level autoencoder: a symmetric stack of affine layers with `tanh`
//! on every layer but the last, trained to reproduce `E_T` under mean
//! absolute error. The middle activation is the compact feature.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{Parameters, TensorRef};
use crate::recurrent::cell::uniform_fill;
use crate::scalar::Scalar;
use crate::train::{clip_gradients, AdamState};

pub const FULL_AEC_DIMS: [usize; 7] = [2048, 1024, 512, 256, 512, 1024, 2048];

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder<T> {
    pub layers: Vec<Dense<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AecConfig {
    /// Layer widths including input and output; empty means "derive from
    /// the feature width" (`d → d/2 → d/4 → d/8 → d/4 → d/2 → d`).
    pub dims: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for AecConfig {
    fn default() -> Self {
        Self {
            dims: Vec::new(),
            epochs: 100,
            learning_rate: 1e-4,
            batch_size: 64,
            clip_norm: 25.0,
            seed: 0,
        }
    }
}

impl AecConfig {
    /// Chain with the same 8× compression ratio as the 2048-wide default.
    pub fn scaled_dims(input: usize) -> Vec<usize> {
        if input == FULL_AEC_DIMS[0] {
            return FULL_AEC_DIMS.to_vec();
        }
        let d = |k: usize| (input / k).max(1);
        vec![input, d(2), d(4), d(8), d(4), d(2), input]
    }

    pub fn resolved_dims(&self, input: usize) -> Vec<usize> {
        if self.dims.is_empty() {
            Self::scaled_dims(input)
        } else {
            self.dims.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AecLog {
    pub initial_error: f64,
    pub final_error: f64,
    /// Training-set mean absolute error after each epoch.
    pub epoch_errors: Vec<f64>,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 || dims.len().is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "autoencoder needs an even number of layers, got dims {dims:?}"
        )));
    }
    if dims.first() != dims.last() || dims.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "autoencoder output width must equal input width and all widths be positive: {dims:?}"
        )));
    }
    Ok(())
}

struct Tape<T> {
    /// activations[0] is the input, activations[l + 1] the output of layer l.
    activations: Vec<Vec<T>>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn random(dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let mut weights = Matrix::zeros(w[1], w[0]);
                let mut b = vec![T::zero(); w[1]];
                uniform_fill(weights.as_mut_slice(), w[0], &mut rng);
                uniform_fill(&mut b, w[0], &mut rng);
                Dense { w: weights, b }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].w.cols()];
        d.extend(self.layers.iter().map(|l| l.w.rows()));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.layers[self.layers.len() / 2 - 1].w.rows()
    }

    fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "autoencoder input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn run(&self, x: &[T], upto: usize) -> Tape<T> {
        let last = self.layers.len() - 1;
        let mut activations = vec![x.to_vec()];
        for (l, layer) in self.layers.iter().enumerate().take(upto) {
            let mut a = layer.b.clone();
            layer.w.gemv_acc(activations.last().unwrap(), &mut a);
            if l != last {
                a.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(a);
        }
        Tape { activations }
    }

    pub fn reconstruct(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x)?;
        Ok(self.run(x, self.layers.len()).activations.pop().unwrap())
    }

    /// Post-`tanh` output of the middle layer; every component lies in (−1, 1).
    pub fn bottleneck(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x)?;
        Ok(self.run(x, self.layers.len() / 2).activations.pop().unwrap())
    }

    /// Mean absolute reconstruction error of one vector.
    pub fn error(&self, x: &[T]) -> Result<T> {
        let y = self.reconstruct(x)?;
        Ok(mae(x, &y))
    }

    pub fn mean_error(&self, xs: &[Vec<T>]) -> Result<f64> {
        let mut s = 0.0;
        for x in xs {
            s += self.error(x)?.as_f64();
        }
        Ok(s / xs.len().max(1) as f64)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    w: Matrix::zeros(l.w.rows(), l.w.cols()),
                    b: vec![T::zero(); l.b.len()],
                })
                .collect(),
        }
    }

    /// Accumulates the gradient of `mae(x, f(x))` into `grad`; returns the loss.
    pub fn backward_into(&self, x: &[T], grad: &mut Self) -> Result<T> {
        self.check(x)?;
        let tape = self.run(x, self.layers.len());
        let out = tape.activations.last().unwrap();
        let n = T::lit(x.len() as f64);
        let loss = mae(x, out);
        let mut delta: Vec<T> = out
            .iter()
            .zip(x)
            .map(|(&y, &t)| {
                let d = y - t;
                if d > T::zero() {
                    T::one() / n
                } else if d < T::zero() {
                    -T::one() / n
                } else {
                    T::zero()
                }
            })
            .collect();
        let last = self.layers.len() - 1;
        for l in (0..self.layers.len()).rev() {
            if l != last {
                let a = &tape.activations[l + 1];
                for (d, &v) in delta.iter_mut().zip(a) {
                    *d *= T::one() - v * v;
                }
            }
            let input = &tape.activations[l];
            grad.layers[l].w.rank1_acc(&delta, input);
            for (b, &d) in grad.layers[l].b.iter_mut().zip(&delta) {
                *b += d;
            }
            if l > 0 {
                let mut prev = vec![T::zero(); input.len()];
                self.layers[l].w.gemv_t_acc(&delta, &mut prev);
                delta = prev;
            }
        }
        Ok(loss)
    }
}

fn mae<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<T>() / T::lit(a.len() as f64)
}

impl<T: Scalar> Parameters<T> for Autoencoder<T> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(TensorRef {
                name: format!("aec.fc{l}.w"),
                shape: [layer.w.rows(), layer.w.cols()],
                data: layer.w.as_slice(),
            });
            out.push(TensorRef {
                name: format!("aec.fc{l}.b"),
                shape: [layer.b.len(), 1],
                data: &layer.b,
            });
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.w.as_mut_slice());
            out.push(&mut layer.b[..]);
        }
        out
    }
}

/// Fits an autoencoder on training-split features with mini-batch Adam.
pub fn train_autoencoder<T: Scalar>(
    features: &[Vec<T>],
    cfg: &AecConfig,
) -> Result<(Autoencoder<T>, AecLog)> {
    let first = features.first().ok_or(Error::EmptyTrainingSet)?;
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("batch_size and learning_rate must be positive".into()));
    }
    let dims = cfg.resolved_dims(first.len());
    if dims[0] != first.len() {
        return Err(Error::ShapeMismatch {
            context: "autoencoder input vs feature width",
            expected: dims[0],
            got: first.len(),
        });
    }
    let mut model = Autoencoder::<T>::random(&dims, cfg.seed)?;
    let initial_error = model.mean_error(features)?;
    let mut log = AecLog {
        initial_error,
        final_error: initial_error,
        epoch_errors: Vec::with_capacity(cfg.epochs),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xaec0_aec0);
    let mut adam = AdamState::for_tensors(&model.tensors_mut());
    let mut order: Vec<usize> = (0..features.len()).collect();
    let clip = T::lit(cfg.clip_norm);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = model.zeros_like();
            let mut loss = T::zero();
            for &i in batch {
                loss += model.backward_into(&features[i], &mut grad)?;
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            grad.scale(T::one() / T::lit(batch.len() as f64));
            clip_gradients(grad.tensors_mut(), clip);
            adam.update(model.tensors_mut(), grad.tensors(), cfg.learning_rate)?;
        }
        log.epoch_errors.push(model.mean_error(features)?);
    }
    log.final_error = log.epoch_errors.last().copied().unwrap_or(initial_error);
    Ok((model, log))
}
