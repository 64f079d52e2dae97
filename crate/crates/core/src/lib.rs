//! Unsupervised skeleton-based action recognition with recurrent sequence
//! autoencoders.
//!
//! Keypoint sequences are brought into a view-invariant body frame,
//! resampled and normalized ([`skeleton`]), then encoded by a stacked
//! bi-directional GRU whose final state `E_T` is trained to regenerate the
//! input through a deliberately weak decoder ([`recurrent`], [`train`]).
//! The final states, optionally compressed by a feature-level autoencoder,
//! are classified by 1-nearest-neighbour cosine similarity ([`features`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod features;
pub mod linalg;
pub mod params;
pub mod recurrent;
pub mod scalar;
pub mod skeleton;
pub mod train;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use params::Parameters;
pub use recurrent::{DecoderStrategy, ModelDims};
pub use scalar::Scalar;
pub use train::LossKind;

pub type Sequence = skeleton::ActionSequence<f64>;
pub type Sequence32 = skeleton::ActionSequence<f32>;
pub type Dataset = skeleton::Dataset<f64>;
pub type Dataset32 = skeleton::Dataset<f32>;
pub type Basis = skeleton::ViewInvariantBasis<f64>;
pub type Model = recurrent::RecurrentModel<f64>;
pub type Model32 = recurrent::RecurrentModel<f32>;
pub type Gradients = recurrent::Gradients<f64>;
pub type FeatureRecord = features::FeatureRecord<f64>;
pub type FeatureRecord32 = features::FeatureRecord<f32>;
pub type Autoencoder = features::Autoencoder<f64>;
pub type Autoencoder32 = features::Autoencoder<f32>;
