use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::optim::{clip_gradients, lr_schedule, AdamState};
use crate::error::{Error, Result};
use crate::features::{evaluate, extract_features, partition};
use crate::linalg::Matrix;
use crate::params::Parameters;
use crate::recurrent::{Gradients, RecurrentModel};
use crate::scalar::Scalar;
use crate::skeleton::{Dataset, Split};

/// Samples per gradient work unit. Fixed so that the reduction order, and
/// hence every bit of the result, does not depend on the thread count.
const CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub clip_norm: f64,
    pub max_iterations: usize,
    /// Iterations between test-split 1-NN evaluations; 0 disables them.
    pub eval_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Mse,
            batch_size: 64,
            learning_rate: 1e-4,
            decay_rate: 0.95,
            decay_steps: 1000,
            clip_norm: 25.0,
            max_iterations: 1000,
            eval_interval: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad("decay_rate must lie in (0, 1]");
        }
        if self.decay_steps == 0 {
            return bad("decay_steps must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        lr_schedule(step, self.learning_rate, self.decay_rate, self.decay_steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// 1-based index of the update this row describes.
    pub iteration: usize,
    /// Mean batch loss before the update.
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
    /// Test-split 1-NN accuracy on raw `E_T` after the update, when evaluated.
    pub accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Accuracy of the model handed to `train`, before any update.
    pub initial_accuracy: Option<f64>,
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn accuracies(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.accuracy.map(|a| (r.iteration, a)))
            .collect()
    }

    /// Mean loss over the first (or last) `n` iterations.
    pub fn mean_loss(&self, n: usize, from_end: bool) -> f64 {
        let l = self.losses();
        let n = n.min(l.len()).max(1);
        let slice = if from_end { &l[l.len().saturating_sub(n)..] } else { &l[..n.min(l.len())] };
        slice.iter().sum::<f64>() / slice.len().max(1) as f64
    }

    /// Same log with timing removed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.records.iter_mut().for_each(|r| r.seconds = 0.0);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss,lr,grad_norm,accuracy,seconds\n");
        for r in &self.records {
            let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{:.6}\n",
                r.iteration, r.loss, r.lr, r.grad_norm, acc, r.seconds
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Flattened model inputs and masks of one split.
pub fn model_inputs<T: Scalar>(dataset: &Dataset<T>, split: Split) -> Vec<(Matrix<T>, Vec<bool>)> {
    dataset
        .split(split)
        .map(|s| (s.sequence.flatten(), s.sequence.mask().to_vec()))
        .collect()
}

/// Mean gradient and loss over `batch`. Samples are processed in fixed-size
/// chunks (possibly in parallel) and the chunk sums are reduced in order.
pub fn batch_gradients<T: Scalar>(
    model: &RecurrentModel<T>,
    inputs: &[(Matrix<T>, Vec<bool>)],
    batch: &[usize],
    loss: LossKind,
) -> Result<(Gradients<T>, T)> {
    let partials: Vec<Result<(Gradients<T>, T)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = model.zero_gradients();
            let mut total = T::zero();
            for &i in chunk {
                let (x, mask) = &inputs[i];
                total += model.backward_into(x, mask, loss, &mut g)?;
            }
            Ok((g, total))
        })
        .collect();
    let mut grads = model.zero_gradients();
    let mut total = T::zero();
    for p in partials {
        let (g, l) = p?;
        grads.accumulate(&g);
        total += l;
    }
    let scale = T::one() / T::lit(batch.len() as f64);
    grads.scale(scale);
    Ok((grads, total * scale))
}

fn check_dims<T: Scalar>(model: &RecurrentModel<T>, dataset: &Dataset<T>) -> Result<()> {
    let j = dataset.check_uniform(None)?;
    if 3 * j != model.dims().input_dim {
        return Err(Error::ShapeMismatch {
            context: "model input width vs dataset J·3",
            expected: model.dims().input_dim,
            got: 3 * j,
        });
    }
    Ok(())
}

/// Raw-`E_T` 1-NN accuracy of `model` on the test split, if there is one.
pub fn knn_accuracy<T: Scalar>(model: &RecurrentModel<T>, dataset: &Dataset<T>) -> Result<Option<f64>> {
    let records = extract_features(&model.encoder, dataset)?;
    let (train, test) = partition(&records);
    if train.is_empty() || test.is_empty() {
        return Ok(None);
    }
    Ok(Some(evaluate(&train, &test)?.accuracy))
}

pub fn train<T: Scalar>(
    model: RecurrentModel<T>,
    dataset: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<(RecurrentModel<T>, TrainLog)> {
    train_with(model, dataset, cfg, |_| {})
}

/// Mini-batch Adam on the masked regeneration loss of the training split.
/// `observer` sees every log row as it is produced.
pub fn train_with<T: Scalar>(
    mut model: RecurrentModel<T>,
    dataset: &Dataset<T>,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&TrainRecord),
) -> Result<(RecurrentModel<T>, TrainLog)> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.max_iterations == 0 {
        return Ok((model, log));
    }
    check_dims(&model, dataset)?;
    let inputs = model_inputs(dataset, Split::Train);
    if inputs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if cfg.eval_interval > 0 {
        log.initial_accuracy = knn_accuracy(&model, dataset)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::for_tensors(&model.trainable_tensors_mut());
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut cursor = order.len();
    let clip = T::lit(cfg.clip_norm);

    for it in 0..cfg.max_iterations {
        let start = Instant::now();
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let batch = &order[cursor..end];
        cursor = end;

        let (mut grads, loss) = match batch_gradients(&model, &inputs, batch, cfg.loss) {
            Err(Error::NonFiniteLoss) => {
                return Err(Error::Divergence { iteration: it + 1, loss: f64::NAN })
            }
            other => other?,
        };
        let loss = loss.as_f64();
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Divergence { iteration: it + 1, loss });
        }
        let grad_norm = clip_gradients(grads.tensors_mut(), clip).as_f64();
        let lr = cfg.lr_at(it as u64);
        adam.update(model.trainable_tensors_mut(), grads.tensors(), lr)
            .map_err(|_| Error::Divergence { iteration: it + 1, loss })?;

        let iteration = it + 1;
        let accuracy = if cfg.eval_interval > 0
            && (iteration % cfg.eval_interval == 0 || iteration == cfg.max_iterations)
        {
            knn_accuracy(&model, dataset)?
        } else {
            None
        };
        let record = TrainRecord {
            iteration,
            loss,
            lr,
            grad_norm,
            accuracy,
            seconds: start.elapsed().as_secs_f64(),
        };
        observer(&record);
        log.records.push(record);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::{DecoderStrategy, ModelDims};
    use crate::skeleton::{generate_synthetic, SynthSpec};

    fn tiny() -> (RecurrentModel<f64>, Dataset<f64>) {
        let spec = SynthSpec { classes: 2, per_class: 4, frames: 6, joints: 4, seed: 1, ..Default::default() };
        let ds = generate_synthetic(&spec).unwrap();
        let dims = ModelDims::new(12, 3, 2, DecoderStrategy::FixedStates);
        (RecurrentModel::init(dims, 2).unwrap(), ds)
    }

    #[test]
    fn zero_iterations_return_the_input_model() {
        let (m, ds) = tiny();
        let cfg = TrainConfig { max_iterations: 0, ..Default::default() };
        let (out, log) = train(m.clone(), &ds, &cfg).unwrap();
        assert_eq!(out, m);
        assert!(log.records.is_empty());
    }

    #[test]
    fn same_seed_same_log() {
        let (m, ds) = tiny();
        let cfg = TrainConfig { max_iterations: 5, batch_size: 3, eval_interval: 2, learning_rate: 1e-2, ..Default::default() };
        let (a, la) = train(m.clone(), &ds, &cfg).unwrap();
        let (b, lb) = train(m, &ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la.without_timing(), lb.without_timing());
        assert_eq!(la.records.len(), 5);
        assert_eq!(la.accuracies().iter().map(|a| a.0).collect::<Vec<_>>(), vec![2, 4, 5]);
    }

    #[test]
    fn fw_training_leaves_decoder_untouched() {
        let (m, ds) = tiny();
        let dims = ModelDims { strategy: DecoderStrategy::FixedWeights, ..m.dims() };
        let m = RecurrentModel::<f64>::init(dims, 4).unwrap();
        let cfg = TrainConfig { max_iterations: 4, batch_size: 2, learning_rate: 1e-2, eval_interval: 0, ..Default::default() };
        let (out, _) = train(m.clone(), &ds, &cfg).unwrap();
        assert_eq!(out.decoder, m.decoder);
        assert_ne!(out.encoder, m.encoder);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (_, ds) = tiny();
        let m = RecurrentModel::<f64>::init(ModelDims::new(9, 2, 1, DecoderStrategy::FixedWeights), 0).unwrap();
        let cfg = TrainConfig { max_iterations: 1, ..Default::default() };
        assert!(matches!(train(m, &ds, &cfg), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn batch_gradient_is_independent_of_thread_count() {
        let (m, ds) = tiny();
        let inputs = model_inputs(&ds, Split::Train);
        let batch: Vec<usize> = (0..inputs.len()).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| batch_gradients(&m, &inputs, &batch, LossKind::Mse).unwrap());
        let b = three.install(|| batch_gradients(&m, &inputs, &batch, LossKind::Mse).unwrap());
        assert_eq!(a.0.encoder, b.0.encoder);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { decay_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"loss":"mae","batch_size":8}"#).unwrap();
        assert_eq!(parsed.loss, LossKind::Mae);
        assert_eq!(parsed.clip_norm, 25.0);
    }
}
