use serde::{Deserialize, Serialize};

use super::trainer::knn_accuracy;
use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::recurrent::{DecoderStrategy, ModelDims, RecurrentModel};
use crate::scalar::Scalar;
use crate::skeleton::Dataset;

/// One architecture to probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    #[serde(default)]
    pub name: String,
    pub hidden: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_strategy")]
    pub strategy: DecoderStrategy,
    #[serde(default)]
    pub seed: u64,
}

fn default_layers() -> usize {
    3
}

fn default_strategy() -> DecoderStrategy {
    DecoderStrategy::FixedWeights
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate: Candidate,
    /// Test-split 1-NN accuracy of the untrained encoder's `E_T`.
    pub accuracy: f64,
    pub parameters: usize,
}

/// Scores every candidate by the 1-NN accuracy of its randomly initialized,
/// untrained encoder and ranks them by accuracy (descending), preferring
/// fewer parameters on ties. No gradients are computed.
pub fn hyperparam_search<T: Scalar>(
    space: &[Candidate],
    dataset: &Dataset<T>,
) -> Result<Vec<RankedCandidate>> {
    let joints = dataset.check_uniform(None)?;
    let mut ranked = Vec::with_capacity(space.len());
    for c in space {
        let dims = ModelDims::new(3 * joints, c.hidden, c.layers, c.strategy);
        let model = RecurrentModel::<T>::init(dims, c.seed)?;
        let accuracy = knn_accuracy(&model, dataset)?.ok_or_else(|| {
            Error::InvalidConfig("hyper-parameter search needs train and test splits".into())
        })?;
        ranked.push(RankedCandidate {
            candidate: c.clone(),
            accuracy,
            parameters: model.num_parameters(),
        });
    }
    ranked.sort_by(|a, b| {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then(a.parameters.cmp(&b.parameters))
    });
    Ok(ranked)
}
