use rand::Rng;

use super::cell::{CellCache, GruCell};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{prefixed, Parameters, TensorRef};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct BiLayer<T> {
    pub forward: GruCell<T>,
    pub backward: GruCell<T>,
}

/// Stacked bi-directional GRU. Layer 0 reads frames; every later layer reads
/// the per-step concatenation `[forward_t, backward_t]` of the layer below.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder<T> {
    pub layers: Vec<BiLayer<T>>,
}

/// Final concatenated state `E_T` and, optionally, the last layer's per-step
/// states (T×2H, padding rows hold the carried state).
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState<T> {
    pub final_state: Vec<T>,
    pub trajectory: Option<Matrix<T>>,
}

pub(crate) struct EncoderTape<T> {
    n: usize,
    fwd: Vec<Vec<CellCache<T>>>,
    bwd: Vec<Vec<CellCache<T>>>,
    fwd_out: Vec<T>,
    bwd_out: Vec<T>,
    valid: Vec<usize>,
}

impl<T: Scalar> Encoder<T> {
    pub fn random<R: Rng>(input_dim: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let d = if l == 0 { input_dim } else { 2 * hidden };
                BiLayer {
                    forward: GruCell::random(d, hidden, rng),
                    backward: GruCell::random(d, hidden, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| BiLayer {
                    forward: l.forward.zeros_like(),
                    backward: l.backward.zeros_like(),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].forward.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].forward.hidden_dim()
    }

    /// Width of `E_T`.
    pub fn state_dim(&self) -> usize {
        2 * self.hidden_dim()
    }

    fn check_input(&self, x: &Matrix<T>, mask: &[bool]) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "encoder input width",
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if mask.len() != x.rows() {
            return Err(Error::ShapeMismatch {
                context: "mask length",
                expected: x.rows(),
                got: mask.len(),
            });
        }
        if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
            let (t, c) = (i / x.cols(), i % x.cols());
            return Err(Error::NonFiniteCoordinate { t, joint: c / 3, axis: c % 3 });
        }
        Ok(())
    }

    /// Runs the stack over the real frames. Masked steps are skipped, which is
    /// the same as carrying the state through them unchanged.
    pub(crate) fn forward_tape(&self, x: &Matrix<T>, mask: &[bool]) -> Result<(Vec<T>, EncoderTape<T>)> {
        self.check_input(x, mask)?;
        let h = self.hidden_dim();
        let valid: Vec<usize> = (0..x.rows()).filter(|&t| mask[t]).collect();
        let n = valid.len();
        let mut inputs: Vec<Vec<T>> = valid.iter().map(|&t| x.row(t).to_vec()).collect();
        let mut fwd_tape = Vec::with_capacity(self.layers.len());
        let mut bwd_tape = Vec::with_capacity(self.layers.len());
        let mut fwd_out = vec![T::zero(); n * h];
        let mut bwd_out = vec![T::zero(); n * h];
        for layer in &self.layers {
            let mut state = vec![T::zero(); h];
            let mut caches = Vec::with_capacity(n);
            for (k, input) in inputs.iter().enumerate() {
                let (next, cache) = layer.forward.forward_cached(input, &state);
                fwd_out[k * h..(k + 1) * h].copy_from_slice(&next);
                caches.push(cache);
                state = next;
            }
            fwd_tape.push(caches);

            let mut state = vec![T::zero(); h];
            let mut caches: Vec<Option<CellCache<T>>> = (0..n).map(|_| None).collect();
            for k in (0..n).rev() {
                let (next, cache) = layer.backward.forward_cached(&inputs[k], &state);
                bwd_out[k * h..(k + 1) * h].copy_from_slice(&next);
                caches[k] = Some(cache);
                state = next;
            }
            bwd_tape.push(caches.into_iter().map(Option::unwrap).collect());

            inputs = (0..n)
                .map(|k| {
                    let mut v = Vec::with_capacity(2 * h);
                    v.extend_from_slice(&fwd_out[k * h..(k + 1) * h]);
                    v.extend_from_slice(&bwd_out[k * h..(k + 1) * h]);
                    v
                })
                .collect();
        }
        let mut final_state = vec![T::zero(); 2 * h];
        if n > 0 {
            final_state[..h].copy_from_slice(&fwd_out[(n - 1) * h..n * h]);
            final_state[h..].copy_from_slice(&bwd_out[..h]);
        }
        Ok((
            final_state,
            EncoderTape {
                n,
                fwd: fwd_tape,
                bwd: bwd_tape,
                fwd_out,
                bwd_out,
                valid,
            },
        ))
    }

    /// Computes `E_T` and the last-layer state trajectory.
    pub fn encode(&self, x: &Matrix<T>, mask: &[bool]) -> Result<EncoderState<T>> {
        let (final_state, tape) = self.forward_tape(x, mask)?;
        let h = self.hidden_dim();
        let rows = x.rows();
        let mut traj = Matrix::zeros(rows, 2 * h);
        // forward half: state after the latest real step at or before t
        let mut k = 0usize;
        for t in 0..rows {
            while k < tape.n && tape.valid[k] <= t {
                k += 1;
            }
            if k > 0 {
                traj.row_mut(t)[..h].copy_from_slice(&tape.fwd_out[(k - 1) * h..k * h]);
            }
        }
        // backward half: state after the earliest real step at or after t
        let mut k = 0usize;
        for t in 0..rows {
            while k < tape.n && tape.valid[k] < t {
                k += 1;
            }
            if k < tape.n {
                traj.row_mut(t)[h..].copy_from_slice(&tape.bwd_out[k * h..(k + 1) * h]);
            }
        }
        Ok(EncoderState {
            final_state,
            trajectory: Some(traj),
        })
    }

    /// `E_T` only.
    pub fn final_state(&self, x: &Matrix<T>, mask: &[bool]) -> Result<Vec<T>> {
        Ok(self.forward_tape(x, mask)?.0)
    }

    /// Backpropagates `∂L/∂E_T` through the whole stack into `grad`.
    pub(crate) fn backward(&self, tape: &EncoderTape<T>, d_final: &[T], grad: &mut Encoder<T>) {
        let h = self.hidden_dim();
        let n = tape.n;
        if n == 0 {
            return;
        }
        let mut d_fwd = vec![T::zero(); n * h];
        let mut d_bwd = vec![T::zero(); n * h];
        d_fwd[(n - 1) * h..].copy_from_slice(&d_final[..h]);
        d_bwd[..h].copy_from_slice(&d_final[h..]);

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            let in_dim = layer.forward.input_dim();
            let mut d_in = vec![T::zero(); n * in_dim];

            let mut carry = vec![T::zero(); h];
            for k in (0..n).rev() {
                let dh: Vec<T> = carry.iter().zip(&d_fwd[k * h..(k + 1) * h]).map(|(&a, &b)| a + b).collect();
                carry = layer.forward.backward(
                    &tape.fwd[l][k],
                    &dh,
                    Some(&mut g.forward),
                    Some(&mut d_in[k * in_dim..(k + 1) * in_dim]),
                );
            }
            let mut carry = vec![T::zero(); h];
            for k in 0..n {
                let dh: Vec<T> = carry.iter().zip(&d_bwd[k * h..(k + 1) * h]).map(|(&a, &b)| a + b).collect();
                carry = layer.backward.backward(
                    &tape.bwd[l][k],
                    &dh,
                    Some(&mut g.backward),
                    Some(&mut d_in[k * in_dim..(k + 1) * in_dim]),
                );
            }
            if l > 0 {
                for k in 0..n {
                    let row = &d_in[k * in_dim..(k + 1) * in_dim];
                    d_fwd[k * h..(k + 1) * h].copy_from_slice(&row[..h]);
                    d_bwd[k * h..(k + 1) * h].copy_from_slice(&row[h..]);
                }
            }
        }
    }
}

impl<T: Scalar> Parameters<T> for Encoder<T> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend(prefixed(&format!("encoder.l{l}.fwd"), layer.forward.named_tensors()));
            out.extend(prefixed(&format!("encoder.l{l}.bwd"), layer.backward.named_tensors()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.forward.tensors_mut());
            out.extend(layer.backward.tensors_mut());
        }
        out
    }
}
