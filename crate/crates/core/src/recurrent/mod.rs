//! GRU machinery: cell, stacked bi-directional encoder, the Fixed Weights and
//! Fixed States decoders, exact backpropagation through time, checkpoints.

pub(crate) mod cell;
mod checkpoint;
mod decoder;
mod encoder;
mod model;

pub use cell::GruCell;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader,
    TensorEntry,
};
pub use decoder::{Decoder, DecoderStrategy};
pub use encoder::{BiLayer, Encoder, EncoderState};
pub use model::{Gradients, ModelDims, RecurrentModel};
