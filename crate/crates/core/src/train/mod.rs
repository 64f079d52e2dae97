//! Regeneration losses, Adam with step decay and global-norm clipping, the
//! mini-batch training loop and random-encoder hyper-parameter search.

pub mod gradcheck;
pub mod loss;
mod hpsearch;
mod optim;
mod trainer;

pub use hpsearch::{hyperparam_search, Candidate, RankedCandidate};
pub use loss::{reconstruction_loss, LossKind};
pub use optim::{clip_gradients, global_norm, lr_schedule, AdamState};
pub use trainer::{
    batch_gradients, knn_accuracy, model_inputs, train, train_with, TrainConfig, TrainLog,
    TrainRecord,
};
