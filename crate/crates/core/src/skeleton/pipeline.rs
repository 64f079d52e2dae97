//! Raw dataset → model-ready dataset, and the on-disk archive of the result.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prep::{normalize, resample, NormMode, NormStats, DEFAULT_T_MAX};
use super::view::{apply_view_invariant, compute_basis};
use super::{ActionSequence, Dataset, JointMap, Sample, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ARCHIVE_FORMAT: &str = "pandc-processed";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub t_max: usize,
    pub norm_mode: NormMode,
    /// Skips the canonical-frame rotation when false (identity basis).
    pub view_invariant: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            norm_mode: NormMode::Global,
            view_invariant: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed<T> {
    pub dataset: Dataset<T>,
    pub stats: NormStats,
    /// `(sequence id, reason)` for every sequence dropped as degenerate.
    pub skipped: Vec<(String, String)>,
}

/// View-invariant transform, resampling to `t_max` frames and min/max
/// normalization. Sequences whose frame-0 pose cannot define a basis are
/// dropped and reported. With `stats` given the normalization is not refit.
pub fn preprocess<T: Scalar>(
    dataset: &Dataset<T>,
    cfg: &PreprocessConfig,
    stats: Option<NormStats>,
) -> Result<Preprocessed<T>> {
    if cfg.t_max == 0 {
        return Err(Error::InvalidConfig("t_max must be positive".into()));
    }
    let mut samples = Vec::with_capacity(dataset.len());
    let mut skipped = Vec::new();
    for s in &dataset.samples {
        let seq = if cfg.view_invariant {
            match compute_basis(&s.sequence) {
                Ok(basis) => apply_view_invariant(&s.sequence, &basis),
                Err(Error::DegeneratePose(msg)) => {
                    skipped.push((s.sequence.id.clone(), msg));
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else {
            s.sequence.clone()
        };
        samples.push(Sample {
            sequence: resample(&seq, cfg.t_max),
            split: s.split,
        });
    }
    let resampled = Dataset::new(samples, dataset.provenance.clone());
    let stats = match stats {
        Some(s) => s,
        None => NormStats::fit(&resampled, cfg.norm_mode)?,
    };
    let (dataset, stats) = normalize(&resampled, Some(stats))?;
    Ok(Preprocessed { dataset, stats, skipped })
}

#[derive(Serialize, Deserialize)]
struct ArchivedSequence {
    id: String,
    split: Split,
    label: Option<i64>,
    subject: Option<i64>,
    view: Option<i64>,
    joint_map: Option<JointMap>,
    num_joints: usize,
    mask: Vec<bool>,
    frames: Vec<Vec<[f64; 3]>>,
}

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    version: u32,
    t_max: usize,
    stats: NormStats,
    sequences: Vec<ArchivedSequence>,
}

/// Writes a preprocessed dataset (with masks and statistics) as one JSON file.
pub fn save_processed<T: Scalar>(dataset: &Dataset<T>, stats: &NormStats, path: &Path) -> Result<()> {
    let t_max = dataset.samples.first().map_or(0, |s| s.sequence.len());
    let sequences = dataset
        .samples
        .iter()
        .map(|s| {
            let q = &s.sequence;
            ArchivedSequence {
                id: q.id.clone(),
                split: s.split,
                label: q.label,
                subject: q.subject,
                view: q.view,
                joint_map: q.joint_map,
                num_joints: q.num_joints(),
                mask: q.mask().to_vec(),
                frames: q
                    .frames()
                    .map(|f| f.iter().map(|p| p.map(|v| v.as_f64())).collect())
                    .collect(),
            }
        })
        .collect();
    let archive = Archive {
        format: ARCHIVE_FORMAT.into(),
        version: ARCHIVE_VERSION,
        t_max,
        stats: stats.clone(),
        sequences,
    };
    let text = serde_json::to_string(&archive)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_processed<T: Scalar>(path: &Path) -> Result<(Dataset<T>, NormStats)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let archive: Archive = serde_json::from_str(&text)?;
    if archive.format != ARCHIVE_FORMAT || archive.version != ARCHIVE_VERSION {
        return Err(Error::Parse(format!(
            "{}: not a processed dataset archive",
            path.display()
        )));
    }
    let mut samples = Vec::with_capacity(archive.sequences.len());
    for a in archive.sequences {
        if a.frames.len() != archive.t_max || a.mask.len() != archive.t_max {
            return Err(Error::ShapeMismatch {
                context: "archived frames per sequence",
                expected: archive.t_max,
                got: a.frames.len(),
            });
        }
        let frames = a
            .frames
            .into_iter()
            .map(|f| f.into_iter().map(|p| p.map(T::lit)).collect())
            .collect();
        let mut seq = ActionSequence::new(a.id, frames)?.with_label(a.label).with_mask(a.mask);
        if seq.num_joints() != a.num_joints {
            return Err(Error::ShapeMismatch {
                context: "archived joints per frame",
                expected: a.num_joints,
                got: seq.num_joints(),
            });
        }
        seq.subject = a.subject;
        seq.view = a.view;
        seq.joint_map = a.joint_map;
        samples.push(Sample { sequence: seq, split: a.split });
    }
    Ok((Dataset::new(samples, path.display().to_string()), archive.stats))
}
