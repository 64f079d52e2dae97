use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{uniform_fill, CellCache, GruCell};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{prefixed, Parameters, TensorRef};
use crate::scalar::Scalar;

/// Weak-decoder variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecoderStrategy {
    /// Fixed Weights: zero input each step, `h₀ = E_T`, linear readout, all
    /// decoder tensors frozen at their random initialization.
    #[serde(rename = "FW", alias = "fw")]
    FixedWeights,
    /// Fixed States: the recurrent input is `E_T` at every step, the
    /// external input is the previous output, `tanh` readout with a residual
    /// connection from input to output. Decoder tensors are trained.
    #[serde(rename = "FS", alias = "fs")]
    FixedStates,
}

impl DecoderStrategy {
    pub fn tag(self) -> &'static str {
        match self {
            Self::FixedWeights => "FW",
            Self::FixedStates => "FS",
        }
    }

    pub fn trains_decoder(self) -> bool {
        matches!(self, Self::FixedStates)
    }
}

impl fmt::Display for DecoderStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for DecoderStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FW" => Ok(Self::FixedWeights),
            "FS" => Ok(Self::FixedStates),
            _ => Err(Error::InvalidConfig(format!("unknown decoder strategy {s:?}"))),
        }
    }
}

/// Uni-directional GRU decoder over the `E_T` width plus a readout to frame space.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder<T> {
    pub cell: GruCell<T>,
    pub w_y: Matrix<T>,
    pub b_y: Vec<T>,
    pub strategy: DecoderStrategy,
}

pub(crate) struct DecoderTape<T> {
    caches: Vec<CellCache<T>>,
    hidden: Vec<Vec<T>>,
    /// FS only: pre-residual `tanh` outputs.
    y: Vec<Vec<T>>,
}

impl<T: Scalar> Decoder<T> {
    pub fn random<R: Rng>(
        output_dim: usize,
        state_dim: usize,
        strategy: DecoderStrategy,
        rng: &mut R,
    ) -> Self {
        let cell = GruCell::random(output_dim, state_dim, rng);
        let mut w_y = Matrix::zeros(output_dim, state_dim);
        uniform_fill(w_y.as_mut_slice(), state_dim, rng);
        let mut b_y = vec![T::zero(); output_dim];
        uniform_fill(&mut b_y, state_dim, rng);
        Self { cell, w_y, b_y, strategy }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            cell: self.cell.zeros_like(),
            w_y: Matrix::zeros(self.w_y.rows(), self.w_y.cols()),
            b_y: vec![T::zero(); self.b_y.len()],
            strategy: self.strategy,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.w_y.rows()
    }

    pub fn state_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    fn check_state(&self, state: &[T]) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::ShapeMismatch {
                context: "decoder initial state",
                expected: self.state_dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    fn require(&self, strategy: DecoderStrategy) -> Result<()> {
        if self.strategy != strategy {
            return Err(Error::StrategyMismatch {
                expected: strategy.tag(),
                got: self.strategy.tag(),
            });
        }
        Ok(())
    }

    fn readout(&self, h: &[T]) -> Vec<T> {
        let mut y = self.b_y.clone();
        self.w_y.gemv_acc(h, &mut y);
        y
    }

    /// Regenerates `steps` frames from `E_T` with this decoder's strategy.
    pub fn decode(&self, state: &[T], steps: usize) -> Result<Matrix<T>> {
        self.check_state(state)?;
        Ok(self.forward_tape(state, steps, &mut |_, _| {}).0)
    }

    pub fn decode_fw(&self, state: &[T], steps: usize) -> Result<Matrix<T>> {
        self.require(DecoderStrategy::FixedWeights)?;
        self.decode(state, steps)
    }

    pub fn decode_fs(&self, state: &[T], steps: usize) -> Result<Matrix<T>> {
        self.require(DecoderStrategy::FixedStates)?;
        self.decode(state, steps)
    }

    /// Like [`decode`](Self::decode), but reports the recurrent-state input
    /// handed to the cell at every step (`h_{t−1}` for FW, `E_T` for FS).
    pub fn decode_probed(
        &self,
        state: &[T],
        steps: usize,
        mut probe: impl FnMut(usize, &[T]),
    ) -> Result<Matrix<T>> {
        self.check_state(state)?;
        Ok(self.forward_tape(state, steps, &mut probe).0)
    }

    /// Vector-Jacobian product `(∂output/∂E_T)ᵀ · d_out`.
    pub fn state_gradient(&self, state: &[T], d_out: &Matrix<T>) -> Result<Vec<T>> {
        self.check_state(state)?;
        if d_out.cols() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                context: "decoder output gradient width",
                expected: self.output_dim(),
                got: d_out.cols(),
            });
        }
        let (_, tape) = self.forward_tape(state, d_out.rows(), &mut |_, _| {});
        Ok(self.backward(&tape, d_out, None))
    }

    pub(crate) fn forward_tape(
        &self,
        state: &[T],
        steps: usize,
        probe: &mut dyn FnMut(usize, &[T]),
    ) -> (Matrix<T>, DecoderTape<T>) {
        let d = self.output_dim();
        let mut out = Matrix::zeros(steps, d);
        let mut tape = DecoderTape {
            caches: Vec::with_capacity(steps),
            hidden: Vec::with_capacity(steps),
            y: Vec::new(),
        };
        match self.strategy {
            DecoderStrategy::FixedWeights => {
                let zero = vec![T::zero(); d];
                let mut h = state.to_vec();
                for t in 0..steps {
                    probe(t, &h);
                    let (next, cache) = self.cell.forward_cached(&zero, &h);
                    out.row_mut(t).copy_from_slice(&self.readout(&next));
                    tape.caches.push(cache);
                    tape.hidden.push(next.clone());
                    h = next;
                }
            }
            DecoderStrategy::FixedStates => {
                let mut x = vec![T::zero(); d];
                for t in 0..steps {
                    probe(t, state);
                    let (h, cache) = self.cell.forward_cached(&x, state);
                    let y: Vec<T> = self.readout(&h).into_iter().map(T::tanh).collect();
                    let y_hat: Vec<T> = y.iter().zip(&x).map(|(&a, &b)| a + b).collect();
                    out.row_mut(t).copy_from_slice(&y_hat);
                    tape.caches.push(cache);
                    tape.hidden.push(h);
                    tape.y.push(y);
                    x = y_hat;
                }
            }
        }
        (out, tape)
    }

    /// Given `∂L/∂output`, accumulates parameter gradients into `grad` (when
    /// given) and returns `∂L/∂E_T`.
    pub(crate) fn backward(
        &self,
        tape: &DecoderTape<T>,
        d_out: &Matrix<T>,
        mut grad: Option<&mut Decoder<T>>,
    ) -> Vec<T> {
        let d = self.output_dim();
        let steps = tape.caches.len();
        match self.strategy {
            DecoderStrategy::FixedWeights => {
                let mut carry = vec![T::zero(); self.state_dim()];
                for t in (0..steps).rev() {
                    let g = d_out.row(t);
                    let mut dh = carry;
                    self.w_y.gemv_t_acc(g, &mut dh);
                    if let Some(gr) = grad.as_deref_mut() {
                        gr.w_y.rank1_acc(g, &tape.hidden[t]);
                        for (b, &v) in gr.b_y.iter_mut().zip(g) {
                            *b += v;
                        }
                    }
                    let cell_grad = grad.as_deref_mut().map(|g| &mut g.cell);
                    carry = self.cell.backward(&tape.caches[t], &dh, cell_grad, None);
                }
                carry
            }
            DecoderStrategy::FixedStates => {
                let mut d_state = vec![T::zero(); self.state_dim()];
                let mut d_next = vec![T::zero(); d];
                for t in (0..steps).rev() {
                    let g: Vec<T> = d_out.row(t).iter().zip(&d_next).map(|(&a, &b)| a + b).collect();
                    let y = &tape.y[t];
                    let da: Vec<T> = g.iter().zip(y).map(|(&gi, &yi)| gi * (T::one() - yi * yi)).collect();
                    let mut dh = vec![T::zero(); self.state_dim()];
                    self.w_y.gemv_t_acc(&da, &mut dh);
                    if let Some(gr) = grad.as_deref_mut() {
                        gr.w_y.rank1_acc(&da, &tape.hidden[t]);
                        for (b, &v) in gr.b_y.iter_mut().zip(&da) {
                            *b += v;
                        }
                    }
                    let mut dx = g;
                    let cell_grad = grad.as_deref_mut().map(|g| &mut g.cell);
                    let ds = self.cell.backward(&tape.caches[t], &dh, cell_grad, Some(&mut dx));
                    for (a, b) in d_state.iter_mut().zip(ds) {
                        *a += b;
                    }
                    d_next = dx;
                }
                d_state
            }
        }
    }
}

impl<T: Scalar> Parameters<T> for Decoder<T> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out: Vec<_> = prefixed("decoder.cell", self.cell.named_tensors()).collect();
        out.push(TensorRef {
            name: "decoder.w_y".into(),
            shape: [self.w_y.rows(), self.w_y.cols()],
            data: self.w_y.as_slice(),
        });
        out.push(TensorRef {
            name: "decoder.b_y".into(),
            shape: [self.b_y.len(), 1],
            data: &self.b_y,
        });
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.cell.tensors_mut();
        out.push(self.w_y.as_mut_slice());
        out.push(&mut self.b_y);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeroed(strategy: DecoderStrategy, d: usize, s: usize) -> Decoder<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut dec = Decoder::random(d, s, strategy, &mut rng);
        dec.zero();
        dec
    }

    #[test]
    fn fw_zero_state_and_biases_output_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut dec = Decoder::<f64>::random(3, 4, DecoderStrategy::FixedWeights, &mut rng);
        for b in [&mut dec.cell.b_r, &mut dec.cell.b_z, &mut dec.cell.b_h, &mut dec.b_y] {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        let out = dec.decode_fw(&[0.0; 4], 5).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fw_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dec = Decoder::<f64>::random(3, 4, DecoderStrategy::FixedWeights, &mut rng);
        let e = [0.1, -0.4, 0.7, 0.2];
        assert_eq!(dec.decode_fw(&e, 6).unwrap(), dec.decode_fw(&e, 6).unwrap());
    }

    #[test]
    fn fw_two_steps_match_hand_unrolled_formula() {
        // scalar toy: D = 1, state width 1
        let mut dec = zeroed(DecoderStrategy::FixedWeights, 1, 1);
        dec.cell.u_r.set(0, 0, 0.3);
        dec.cell.b_r[0] = -0.1;
        dec.cell.u_z.set(0, 0, 0.8);
        dec.cell.b_z[0] = 0.2;
        dec.cell.u_h.set(0, 0, -1.2);
        dec.cell.b_h[0] = 0.05;
        dec.w_y.set(0, 0, 1.7);
        dec.b_y[0] = -0.3;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let step = |h: f64| {
            let r = sig(0.3 * h - 0.1);
            let z = sig(0.8 * h + 0.2);
            let c = (-1.2 * r * h + 0.05).tanh();
            (1.0 - z) * h + z * c
        };
        let e = 0.9;
        let out = dec.decode_fw(&[e], 2).unwrap();
        assert!((out.get(0, 0) - (1.7 * step(e) - 0.3)).abs() < 1e-14);
        assert!((out.get(1, 0) - (1.7 * step(step(e)) - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn fs_all_zero_parameters_output_zero() {
        let dec = zeroed(DecoderStrategy::FixedStates, 3, 4);
        let out = dec.decode_fs(&[0.5, -2.0, 1.0, 3.0], 7).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fs_recurrent_input_is_always_the_encoder_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dec = Decoder::<f64>::random(3, 4, DecoderStrategy::FixedStates, &mut rng);
        let e = vec![0.3, -0.2, 0.9, 0.05];
        let mut seen = Vec::new();
        dec.decode_probed(&e, 6, |t, h| seen.push((t, h.to_vec()))).unwrap();
        assert_eq!(seen.len(), 6);
        assert!(seen.iter().all(|(_, h)| *h == e));
    }

    #[test]
    fn fs_two_steps_match_hand_unrolled_formula() {
        let mut dec = zeroed(DecoderStrategy::FixedStates, 1, 1);
        dec.cell.w_r.set(0, 0, 0.4);
        dec.cell.u_r.set(0, 0, -0.5);
        dec.cell.w_z.set(0, 0, 0.9);
        dec.cell.u_z.set(0, 0, 0.1);
        dec.cell.b_z[0] = 0.3;
        dec.cell.w_h.set(0, 0, 1.1);
        dec.cell.u_h.set(0, 0, 0.7);
        dec.cell.b_h[0] = -0.2;
        dec.w_y.set(0, 0, 1.3);
        dec.b_y[0] = 0.1;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let e = 0.6;
        let cell = |x: f64| {
            let r = sig(0.4 * x - 0.5 * e);
            let z = sig(0.9 * x + 0.1 * e + 0.3);
            let c = (1.1 * x + 0.7 * r * e - 0.2).tanh();
            (1.0 - z) * e + z * c
        };
        let y1 = (1.3 * cell(0.0) + 0.1).tanh();
        let y1_hat = y1 + 0.0;
        let y2_hat = (1.3 * cell(y1_hat) + 0.1).tanh() + y1_hat;
        let out = dec.decode_fs(&[e], 2).unwrap();
        assert!((out.get(0, 0) - y1_hat).abs() < 1e-14);
        assert!((out.get(1, 0) - y2_hat).abs() < 1e-14);
    }

    #[test]
    fn strategy_is_enforced() {
        let dec = zeroed(DecoderStrategy::FixedWeights, 2, 2);
        assert!(matches!(dec.decode_fs(&[0.0; 2], 1), Err(Error::StrategyMismatch { .. })));
        let dec = zeroed(DecoderStrategy::FixedStates, 2, 2);
        assert!(matches!(dec.decode_fw(&[0.0; 2], 1), Err(Error::StrategyMismatch { .. })));
    }

    #[test]
    fn strategy_parses_and_serializes_as_tag() {
        assert_eq!("fs".parse::<DecoderStrategy>().unwrap(), DecoderStrategy::FixedStates);
        assert_eq!(serde_json::to_string(&DecoderStrategy::FixedWeights).unwrap(), "\"FW\"");
    }
}
