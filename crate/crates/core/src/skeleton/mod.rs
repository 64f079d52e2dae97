//! Body-keypoint sequences and their preprocessing into fixed-length,
//! normalized, view-invariant model inputs.

mod io;
mod pipeline;
mod prep;
mod synth;
mod view;

pub use io::{
    load_dataset, load_manifest, load_sequence, save_sequence_json, write_manifest, ManifestEntry,
    SequenceFormat,
};
pub use pipeline::{load_processed, preprocess, save_processed, PreprocessConfig, Preprocessed};
pub use prep::{normalize, resample, NormMode, NormStats, DEFAULT_T_MAX};
pub use synth::{generate_synthetic, SynthSpec};
pub use view::{apply_view_invariant, compute_basis, ViewInvariantBasis, GEOMETRY_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One 3-D keypoint.
pub type Joint<T> = [T; 3];

/// Indices of the joints that anchor the view-invariant frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointMap {
    pub root: usize,
    pub spine: usize,
    pub hip_left: usize,
    pub hip_right: usize,
}

impl JointMap {
    pub fn validate(&self, num_joints: usize) -> Result<()> {
        let idx = [self.root, self.spine, self.hip_left, self.hip_right];
        if let Some(&bad) = idx.iter().find(|&&i| i >= num_joints) {
            return Err(Error::InvalidJointMap(format!(
                "index {bad} out of range for {num_joints} joints"
            )));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if idx[i] == idx[j] {
                    return Err(Error::InvalidJointMap(format!(
                        "joint index {} used twice",
                        idx[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A T×J×3 keypoint time series with its metadata.
///
/// Frames are stored contiguously, joint-major within a frame. `mask`
/// marks real frames; zero padding added by [`resample`] is `false`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSequence<T> {
    pub id: String,
    pub label: Option<i64>,
    pub subject: Option<i64>,
    pub view: Option<i64>,
    pub joint_map: Option<JointMap>,
    num_joints: usize,
    joints: Vec<Joint<T>>,
    mask: Vec<bool>,
}

impl<T: Scalar> ActionSequence<T> {
    /// Builds a sequence from per-frame joint lists, checking shape and finiteness.
    pub fn new(id: impl Into<String>, frames: Vec<Vec<Joint<T>>>) -> Result<Self> {
        let num_joints = frames.first().map(Vec::len).ok_or(Error::EmptySequence)?;
        if num_joints == 0 {
            return Err(Error::Parse("frame with zero joints".into()));
        }
        let mut joints = Vec::with_capacity(frames.len() * num_joints);
        for (t, f) in frames.iter().enumerate() {
            if f.len() != num_joints {
                return Err(Error::ShapeMismatch {
                    context: "joints per frame",
                    expected: num_joints,
                    got: f.len(),
                });
            }
            for (j, p) in f.iter().enumerate() {
                if let Some(axis) = p.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteCoordinate { t, joint: j, axis });
                }
            }
            joints.extend_from_slice(f);
        }
        let len = frames.len();
        Ok(Self {
            id: id.into(),
            label: None,
            subject: None,
            view: None,
            joint_map: None,
            num_joints,
            joints,
            mask: vec![true; len],
        })
    }

    /// Builds a sequence from flat joint storage and an explicit mask.
    pub(crate) fn from_parts(
        template: &Self,
        num_joints: usize,
        joints: Vec<Joint<T>>,
        mask: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(joints.len(), num_joints * mask.len());
        Self {
            id: template.id.clone(),
            label: template.label,
            subject: template.subject,
            view: template.view,
            joint_map: template.joint_map,
            num_joints,
            joints,
            mask,
        }
    }

    pub fn with_label(mut self, label: Option<i64>) -> Self {
        self.label = label;
        self
    }

    pub fn with_joint_map(mut self, map: JointMap) -> Result<Self> {
        map.validate(self.num_joints)?;
        self.joint_map = Some(map);
        Ok(self)
    }

    /// Replaces the validity mask. Panics if the length differs from the frame count.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.len(), "mask length");
        self.mask = mask;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    #[inline]
    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    #[inline]
    pub fn frame(&self, t: usize) -> &[Joint<T>] {
        &self.joints[t * self.num_joints..(t + 1) * self.num_joints]
    }

    #[inline]
    pub fn frame_mut(&mut self, t: usize) -> &mut [Joint<T>] {
        let j = self.num_joints;
        &mut self.joints[t * j..(t + 1) * j]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Joint<T>]> {
        self.joints.chunks_exact(self.num_joints)
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn require_joint_map(&self) -> Result<JointMap> {
        self.joint_map
            .ok_or_else(|| Error::InvalidJointMap(format!("sequence {} has no joint_map", self.id)))
    }

    /// T×(J·3) matrix, one row per frame, joints major and axes minor.
    pub fn flatten(&self) -> Matrix<T> {
        let cols = self.num_joints * 3;
        let data = self.joints.iter().flat_map(|p| p.iter().copied()).collect();
        Matrix::from_vec(self.len(), cols, data)
    }

    /// Inverse of [`flatten`](Self::flatten); metadata is copied from `template`.
    pub fn unflatten(template: &Self, m: &Matrix<T>) -> Result<Self> {
        if !m.cols().is_multiple_of(3) || m.cols() == 0 {
            return Err(Error::ShapeMismatch {
                context: "flattened columns (multiple of 3)",
                expected: 3 * (m.cols() / 3).max(1),
                got: m.cols(),
            });
        }
        let joints = m
            .as_slice()
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let mask = if template.len() == m.rows() {
            template.mask.clone()
        } else {
            vec![true; m.rows()]
        };
        Ok(Self::from_parts(template, m.cols() / 3, joints, mask))
    }

    pub fn cast<U: Scalar>(&self) -> ActionSequence<U> {
        ActionSequence {
            id: self.id.clone(),
            label: self.label,
            subject: self.subject,
            view: self.view,
            joint_map: self.joint_map,
            num_joints: self.num_joints,
            joints: self
                .joints
                .iter()
                .map(|p| p.map(|v| U::lit(v.as_f64())))
                .collect(),
            mask: self.mask.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub sequence: ActionSequence<T>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub samples: Vec<Sample<T>>,
    pub provenance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(samples: Vec<Sample<T>>, provenance: impl Into<String>) -> Self {
        Self {
            samples,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample<T>> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Fails unless every sequence has the same joint count and, when
    /// `frames` is given, exactly that many frames.
    pub fn check_uniform(&self, frames: Option<usize>) -> Result<usize> {
        let j = self
            .samples
            .first()
            .map(|s| s.sequence.num_joints())
            .ok_or(Error::EmptyTrainingSet)?;
        for s in &self.samples {
            if s.sequence.num_joints() != j {
                return Err(Error::ShapeMismatch {
                    context: "joints per sequence",
                    expected: j,
                    got: s.sequence.num_joints(),
                });
            }
            if let Some(t) = frames {
                if s.sequence.len() != t {
                    return Err(Error::ShapeMismatch {
                        context: "frames per sequence",
                        expected: t,
                        got: s.sequence.len(),
                    });
                }
            }
        }
        Ok(j)
    }

    /// Sorted distinct labels.
    pub fn labels(&self) -> Vec<i64> {
        let mut l: Vec<i64> = self.samples.iter().filter_map(|s| s.sequence.label).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_joint_seq() -> ActionSequence<f64> {
        ActionSequence::new(
            "s",
            vec![
                vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
                vec![[7.0, 8.0, 9.0], [10.0, 11.0, 12.0]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn flatten_is_joint_major_axis_minor() {
        let m = two_joint_seq().flatten();
        assert_eq!(m.shape(), (2, 6));
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let s = two_joint_seq();
        let back = ActionSequence::unflatten(&s, &s.flatten()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn flatten_shape_for_default_skeleton() {
        let frames = vec![vec![[0.0f64; 3]; 25]; 50];
        let s = ActionSequence::new("x", frames).unwrap();
        assert_eq!(s.flatten().shape(), (50, 75));
    }

    #[test]
    fn empty_and_non_finite_sequences_are_rejected() {
        assert!(matches!(
            ActionSequence::<f64>::new("e", vec![]),
            Err(Error::EmptySequence)
        ));
        let err = ActionSequence::new("n", vec![vec![[0.0, 0.0, 0.0]], vec![[0.0, f64::NAN, 0.0]]])
            .unwrap_err();
        assert_eq!(err.to_string(), "non-finite coordinate at (1, 0, 1)");
    }

    #[test]
    fn joint_map_validation() {
        let ok = JointMap { root: 0, spine: 1, hip_left: 2, hip_right: 3 };
        assert!(ok.validate(4).is_ok());
        assert!(ok.validate(3).is_err());
        let dup = JointMap { root: 0, spine: 0, hip_left: 2, hip_right: 3 };
        assert!(dup.validate(4).is_err());
    }
}
