use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureRecord;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::scalar::Scalar;

pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            context: "cosine operands",
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).max(-T::one()).min(T::one()))
}

/// k-nearest-neighbour classifier under cosine similarity with cached norms.
///
/// Neighbours are ranked by similarity, then by lowest record id, so the
/// result is fully deterministic. For `k > 1` the majority label wins and
/// vote ties go to the label of the best-ranked tied neighbour.
pub struct KnnClassifier<'a, T> {
    train: &'a [FeatureRecord<T>],
    norms: Vec<T>,
    k: usize,
}

impl<'a, T: Scalar> KnnClassifier<'a, T> {
    pub fn new(train: &'a [FeatureRecord<T>], k: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let dim = train[0].feature.len();
        let mut norms = Vec::with_capacity(train.len());
        for r in train {
            if r.feature.len() != dim {
                return Err(Error::ShapeMismatch {
                    context: "training feature length",
                    expected: dim,
                    got: r.feature.len(),
                });
            }
            let n = norm(&r.feature);
            if n == T::zero() {
                return Err(Error::ZeroVector);
            }
            norms.push(n);
        }
        Ok(Self { train, norms, k })
    }

    pub fn classify(&self, query: &[T]) -> Result<i64> {
        let dim = self.train[0].feature.len();
        if query.len() != dim {
            return Err(Error::ShapeMismatch {
                context: "query feature length",
                expected: dim,
                got: query.len(),
            });
        }
        let qn = norm(query);
        if qn == T::zero() {
            return Err(Error::ZeroVector);
        }
        let better = |a: (T, usize), b: (T, usize)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);

        if self.k == 1 {
            let mut best: Option<(T, usize, i64)> = None;
            for (r, &n) in self.train.iter().zip(&self.norms) {
                let s = dot(&r.feature, query) / (n * qn);
                if best.is_none_or(|(bs, bid, _)| better((s, r.id), (bs, bid))) {
                    best = Some((s, r.id, r.label));
                }
            }
            return Ok(best.expect("non-empty training set").2);
        }

        let mut scored: Vec<(T, usize, i64)> = self
            .train
            .iter()
            .zip(&self.norms)
            .map(|(r, &n)| (dot(&r.feature, query) / (n * qn), r.id, r.label))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let top = &scored[..self.k.min(scored.len())];
        let mut votes: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
        for (rank, &(_, _, label)) in top.iter().enumerate() {
            let e = votes.entry(label).or_insert((0, rank));
            e.0 += 1;
        }
        let winner = votes
            .into_iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(l, _)| l)
            .expect("k ≥ 1");
        Ok(winner)
    }
}

/// Label of the most cosine-similar training record (k = 1 in practice).
pub fn knn_classify<T: Scalar>(train: &[FeatureRecord<T>], query: &[T], k: usize) -> Result<i64> {
    KnnClassifier::new(train, k)?.classify(query)
}

/// Rows are true classes, columns predicted classes, both in `labels` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<i64>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label");
        for l in &self.labels {
            s.push_str(&format!(",{l}"));
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            s.push_str(&l.to_string());
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<i64>,
}

/// 1-NN cosine classification of every test record against `train`.
pub fn evaluate<T: Scalar>(train: &[FeatureRecord<T>], test: &[FeatureRecord<T>]) -> Result<Evaluation> {
    let clf = KnnClassifier::new(train, 1)?;
    let predictions: Vec<i64> = test
        .par_iter()
        .map(|r| clf.classify(&r.feature))
        .collect::<Result<_>>()?;
    let mut labels: Vec<i64> = train.iter().chain(test).map(|r| r.label).collect();
    labels.sort_unstable();
    labels.dedup();
    let index: BTreeMap<i64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    let mut correct = 0usize;
    for (r, &p) in test.iter().zip(&predictions) {
        counts[index[&r.label]][index[&p]] += 1;
        correct += usize::from(r.label == p);
    }
    let accuracy = if test.is_empty() { 0.0 } else { correct as f64 / test.len() as f64 };
    Ok(Evaluation {
        accuracy,
        confusion: ConfusionMatrix { labels, counts },
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::Split;

    fn rec(id: usize, label: i64, feature: Vec<f64>) -> FeatureRecord<f64> {
        FeatureRecord { id, name: format!("r{id}"), label, split: Split::Train, feature }
    }

    #[test]
    fn cosine_values() {
        assert!((cosine_similarity::<f64>(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 5.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn nearest_angle_wins() {
        let deg = |d: f64| vec![d.to_radians().cos(), d.to_radians().sin()];
        let train = vec![rec(0, 10, deg(0.0)), rec(1, 11, deg(45.0)), rec(2, 12, deg(90.0))];
        assert_eq!(knn_classify(&train, &deg(10.0), 1).unwrap(), 10);
        assert_eq!(knn_classify(&train, &deg(80.0), 1).unwrap(), 12);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let train = vec![rec(5, 1, vec![1.0, 0.0]), rec(2, 2, vec![2.0, 0.0]), rec(9, 3, vec![0.5, 0.0])];
        for _ in 0..10 {
            assert_eq!(knn_classify(&train, &[3.0, 0.0], 1).unwrap(), 2);
        }
    }

    #[test]
    fn majority_vote_for_larger_k() {
        let train = vec![
            rec(0, 1, vec![1.0, 0.0]),
            rec(1, 2, vec![1.0, 0.1]),
            rec(2, 2, vec![1.0, 0.2]),
            rec(3, 1, vec![0.0, 1.0]),
        ];
        assert_eq!(knn_classify(&train, &[1.0, 0.0], 1).unwrap(), 1);
        assert_eq!(knn_classify(&train, &[1.0, 0.0], 3).unwrap(), 2);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(matches!(knn_classify::<f64>(&[], &[1.0], 1), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn evaluation_counts() {
        let train = vec![rec(0, 0, vec![1.0, 0.0]), rec(1, 1, vec![0.0, 1.0])];
        let ev = evaluate(&train, &train).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        assert_eq!(ev.confusion.counts, vec![vec![1, 0], vec![0, 1]]);

        // flipped labels: every prediction is wrong but row sums still count the truth
        let test = vec![rec(2, 1, vec![1.0, 0.1]), rec(3, 0, vec![0.1, 1.0]), rec(4, 0, vec![0.0, 2.0])];
        let ev = evaluate(&train, &test).unwrap();
        assert_eq!(ev.accuracy, 0.0);
        assert_eq!(ev.confusion.row_sums(), vec![2, 1]);
        assert_eq!(ev.confusion.total(), 3);
        assert_eq!(ev.confusion.to_csv(), "label,0,1\n0,0,2\n1,1,0\n");
    }
}
