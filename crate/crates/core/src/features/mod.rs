//! Post-training features: final encoder states, the feature autoencoder,
//! nearest-neighbour evaluation and PCA exports.

mod aec;
mod knn;
mod pca;

pub use aec::{train_autoencoder, AecConfig, AecLog, Autoencoder, Dense, FULL_AEC_DIMS};
pub use knn::{cosine_similarity, evaluate, knn_classify, ConfusionMatrix, Evaluation, KnnClassifier};
pub use pca::{pca_project, Pca};

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::recurrent::Encoder;
use crate::scalar::Scalar;
use crate::skeleton::{Dataset, Split};

/// Feature vector of one sequence. `id` is the sample's position in its
/// dataset and is the tie-break key for classification.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord<T> {
    pub id: usize,
    pub name: String,
    pub label: i64,
    pub split: Split,
    pub feature: Vec<T>,
}

/// Final encoder state `E_T` of every sequence, in dataset order.
pub fn extract_features<T: Scalar>(encoder: &Encoder<T>, dataset: &Dataset<T>) -> Result<Vec<FeatureRecord<T>>> {
    dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(id, s)| {
            let seq = &s.sequence;
            let label = seq
                .label
                .ok_or_else(|| Error::Parse(format!("sequence {} has no label", seq.id)))?;
            let feature = encoder.final_state(&seq.flatten(), seq.mask())?;
            Ok(FeatureRecord {
                id,
                name: seq.id.clone(),
                label,
                split: s.split,
                feature,
            })
        })
        .collect()
}

/// Replaces every feature by its autoencoder bottleneck.
pub fn compress_features<T: Scalar>(aec: &Autoencoder<T>, records: &[FeatureRecord<T>]) -> Result<Vec<FeatureRecord<T>>> {
    records
        .par_iter()
        .map(|r| {
            Ok(FeatureRecord {
                feature: aec.bottleneck(&r.feature)?,
                ..r.clone()
            })
        })
        .collect()
}

pub fn partition<T: Clone>(records: &[FeatureRecord<T>]) -> (Vec<FeatureRecord<T>>, Vec<FeatureRecord<T>>) {
    records.iter().cloned().partition(|r| r.split == Split::Train)
}

/// `id,label,f0,f1,…` with the sequence id in the first column.
pub fn features_to_csv<T: Scalar>(records: &[FeatureRecord<T>]) -> String {
    let dim = records.first().map_or(0, |r| r.feature.len());
    let mut s = String::from("id,label");
    for k in 0..dim {
        let _ = write!(s, ",f{k}");
    }
    s.push('\n');
    for r in records {
        let _ = write!(s, "{},{}", r.name, r.label);
        for v in &r.feature {
            let _ = write!(s, ",{}", v.as_f64());
        }
        s.push('\n');
    }
    s
}

pub fn write_features_csv<T: Scalar>(records: &[FeatureRecord<T>], path: &Path) -> Result<()> {
    std::fs::write(path, features_to_csv(records)).map_err(|e| Error::io(path, e))
}

/// One row per projected point: `id,pc1,…,label`.
pub fn projection_to_csv(ids: &[String], labels: &[i64], pca: &Pca) -> String {
    let k = pca.projected.cols();
    let mut s = String::from("id");
    for c in 1..=k {
        let _ = write!(s, ",pc{c}");
    }
    s.push_str(",label\n");
    for (i, (id, label)) in ids.iter().zip(labels).enumerate() {
        s.push_str(id);
        for v in pca.projected.row(i) {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{label}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrent::Encoder;
    use crate::skeleton::{ActionSequence, Sample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset() -> Dataset<f64> {
        let mk = |id: &str, label, shift: f64| {
            let frames = (0..4)
                .map(|t| vec![[t as f64 * 0.1 + shift, 0.2, -0.3], [0.0, shift, 0.5]])
                .collect();
            ActionSequence::new(id, frames).unwrap().with_label(Some(label))
        };
        Dataset::new(
            vec![
                Sample { sequence: mk("a", 0, 0.1), split: Split::Train },
                Sample { sequence: mk("b", 1, 0.4), split: Split::Test },
                Sample { sequence: mk("c", 0, 0.1), split: Split::Test },
            ],
            "test",
        )
    }

    #[test]
    fn one_record_per_sequence_with_state_width() {
        let enc = Encoder::<f64>::random(6, 5, 2, &mut ChaCha8Rng::seed_from_u64(0));
        let recs = extract_features(&enc, &dataset()).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.feature.len() == 10));
        assert_eq!(recs[0].feature, recs[2].feature);
        assert_eq!(recs[1].name, "b");
        let (train, test) = partition(&recs);
        assert_eq!((train.len(), test.len()), (1, 2));
    }

    #[test]
    fn unlabeled_sequences_are_rejected() {
        let mut ds = dataset();
        ds.samples[1].sequence.label = None;
        let enc = Encoder::<f64>::random(6, 3, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(extract_features(&enc, &ds).is_err());
    }

    #[test]
    fn csv_layout() {
        let recs = vec![FeatureRecord { id: 0, name: "s0".into(), label: 2, split: Split::Train, feature: vec![0.5, -1.0] }];
        assert_eq!(features_to_csv(&recs), "id,label,f0,f1\ns0,2,0.5,-1\n");
    }
}
