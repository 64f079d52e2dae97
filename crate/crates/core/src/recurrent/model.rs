use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decoder::{Decoder, DecoderStrategy};
use super::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{Parameters, TensorRef};
use crate::scalar::Scalar;
use crate::train::loss::{loss_with_grad, LossKind};

/// Architecture of an encoder/decoder pair. The decoder state width is `2·hidden`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Flattened frame width, `J·3`.
    pub input_dim: usize,
    /// Units per direction in every encoder layer.
    pub hidden: usize,
    pub layers: usize,
    pub strategy: DecoderStrategy,
}

impl ModelDims {
    pub fn new(input_dim: usize, hidden: usize, layers: usize, strategy: DecoderStrategy) -> Self {
        Self { input_dim, hidden, layers, strategy }
    }

    /// 3-layer bi-GRU with 1024 units per direction (2048-wide `E_T`).
    pub fn full_size(input_dim: usize, strategy: DecoderStrategy) -> Self {
        Self::new(input_dim, 1024, 3, strategy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig(format!(
                "model dims must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        2 * self.hidden
    }
}

/// Bi-GRU encoder plus weak decoder, trained by regenerating the input.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentModel<T> {
    pub encoder: Encoder<T>,
    pub decoder: Decoder<T>,
}

/// Gradients of one pass. `decoder` is `None` for Fixed Weights models,
/// whose decoder is frozen.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub encoder: Encoder<T>,
    pub decoder: Option<Decoder<T>>,
    /// `∂L/∂E_T` for the sequence this gradient was computed on.
    pub state: Vec<T>,
}

impl<T: Scalar> RecurrentModel<T> {
    /// Scaled-uniform random initialization, deterministic in `seed`.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::random(dims.input_dim, dims.hidden, dims.layers, &mut rng);
        let decoder = Decoder::random(dims.input_dim, dims.state_dim(), dims.strategy, &mut rng);
        Ok(Self { encoder, decoder })
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input_dim: self.encoder.input_dim(),
            hidden: self.encoder.hidden_dim(),
            layers: self.encoder.layers.len(),
            strategy: self.decoder.strategy,
        }
    }

    pub fn strategy(&self) -> DecoderStrategy {
        self.decoder.strategy
    }

    /// `E_T` → regenerated sequence of the same length as `x`.
    pub fn reconstruct(&self, x: &Matrix<T>, mask: &[bool]) -> Result<Matrix<T>> {
        let e = self.encoder.final_state(x, mask)?;
        self.decoder.decode(&e, x.rows())
    }

    pub fn loss(&self, x: &Matrix<T>, mask: &[bool], kind: LossKind) -> Result<T> {
        let y = self.reconstruct(x, mask)?;
        crate::train::loss::reconstruction_loss(x, &y, mask, kind)
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            encoder: self.encoder.zeros_like(),
            decoder: self
                .strategy()
                .trains_decoder()
                .then(|| self.decoder.zeros_like()),
            state: vec![T::zero(); self.encoder.state_dim()],
        }
    }

    /// Exact gradients of the masked regeneration loss of `x` by
    /// backpropagation through time, and the loss itself.
    pub fn backward(&self, x: &Matrix<T>, mask: &[bool], kind: LossKind) -> Result<(Gradients<T>, T)> {
        let mut grads = self.zero_gradients();
        let loss = self.backward_into(x, mask, kind, &mut grads)?;
        Ok((grads, loss))
    }

    /// As [`backward`](Self::backward) but accumulating into existing gradients.
    pub fn backward_into(
        &self,
        x: &Matrix<T>,
        mask: &[bool],
        kind: LossKind,
        grads: &mut Gradients<T>,
    ) -> Result<T> {
        let (e, enc_tape) = self.encoder.forward_tape(x, mask)?;
        let (y, dec_tape) = self.decoder.forward_tape(&e, x.rows(), &mut |_, _| {});
        let (loss, d_out) = loss_with_grad(x, &y, mask, kind)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let d_state = self.decoder.backward(&dec_tape, &d_out, grads.decoder.as_mut());
        self.encoder.backward(&enc_tape, &d_state, &mut grads.encoder);
        grads.state = d_state;
        Ok(loss)
    }

    /// Tensors the optimizer may update: the encoder, plus the decoder for FS.
    pub fn trainable_tensors_mut(&mut self) -> Vec<&mut [T]> {
        let trains_decoder = self.strategy().trains_decoder();
        let mut out = self.encoder.tensors_mut();
        if trains_decoder {
            out.extend(self.decoder.tensors_mut());
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> RecurrentModel<U> {
        let mut out = RecurrentModel::<U>::init(self.dims(), 0).expect("dims already valid");
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = U::lit(s.as_f64());
            }
        }
        out
    }
}

impl<T: Scalar> Parameters<T> for RecurrentModel<T> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = self.encoder.named_tensors();
        out.extend(self.decoder.named_tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.decoder.tensors_mut());
        out
    }
}

impl<T: Scalar> Parameters<T> for Gradients<T> {
    fn named_tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = self.encoder.named_tensors();
        if let Some(d) = &self.decoder {
            out.extend(d.named_tensors());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.encoder.tensors_mut();
        if let Some(d) = &mut self.decoder {
            out.extend(d.tensors_mut());
        }
        out
    }
}
