//! Canonical sequence files (JSON or CSV) and dataset manifests.
//!
//! JSON layout:
//!
//! ```json
//! {"id": "a01_s01", "label": 3, "subject": 1, "view": 2, "num_joints": 20,
//!  "joint_map": {"root": 0, "spine": 1, "hip_left": 12, "hip_right": 16},
//!  "frames": [[[x, y, z], ...], ...]}
//! ```
//!
//! CSV layout: `#key=value` metadata lines (`id`, `label`, `subject`, `view`,
//! `num_joints`, `joint_map=root:0;spine:1;hip_left:2;hip_right:3`) followed
//! by a `t,joint,x,y,z` table with one row per keypoint.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ActionSequence, Dataset, Joint, JointMap, Sample, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceFormat {
    Json,
    Csv,
}

impl SequenceFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

// `null` is how JSON encoders write NaN, so coordinates are optional on read.
#[derive(Deserialize)]
struct SequenceFileIn {
    id: String,
    #[serde(default)]
    label: Option<i64>,
    #[serde(default)]
    subject: Option<i64>,
    #[serde(default)]
    view: Option<i64>,
    num_joints: usize,
    #[serde(default)]
    joint_map: Option<JointMap>,
    frames: Vec<Vec<[Option<f64>; 3]>>,
}

#[derive(Serialize)]
struct SequenceFileOut<'a> {
    id: &'a str,
    label: Option<i64>,
    subject: Option<i64>,
    view: Option<i64>,
    num_joints: usize,
    joint_map: Option<JointMap>,
    frames: Vec<Vec<[f64; 3]>>,
}

pub fn load_sequence<T: Scalar>(path: &Path, format: SequenceFormat) -> Result<ActionSequence<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        SequenceFormat::Json => parse_json(&text),
        SequenceFormat::Csv => parse_csv(&text),
    }
}

fn parse_json<T: Scalar>(text: &str) -> Result<ActionSequence<T>> {
    let file: SequenceFileIn = serde_json::from_str(text)?;
    let mut frames = Vec::with_capacity(file.frames.len());
    for (t, f) in file.frames.iter().enumerate() {
        if f.len() != file.num_joints {
            return Err(Error::ShapeMismatch {
                context: "joints in frame vs num_joints",
                expected: file.num_joints,
                got: f.len(),
            });
        }
        let mut joints = Vec::with_capacity(f.len());
        for (j, p) in f.iter().enumerate() {
            let mut out = [T::zero(); 3];
            for axis in 0..3 {
                match p[axis] {
                    Some(v) if v.is_finite() => out[axis] = T::lit(v),
                    _ => return Err(Error::NonFiniteCoordinate { t, joint: j, axis }),
                }
            }
            joints.push(out);
        }
        frames.push(joints);
    }
    finish(file.id, file.label, file.subject, file.view, file.joint_map, frames)
}

fn finish<T: Scalar>(
    id: String,
    label: Option<i64>,
    subject: Option<i64>,
    view: Option<i64>,
    joint_map: Option<JointMap>,
    frames: Vec<Vec<Joint<T>>>,
) -> Result<ActionSequence<T>> {
    let mut seq = ActionSequence::new(id, frames)?;
    seq.label = label;
    seq.subject = subject;
    seq.view = view;
    if let Some(map) = joint_map {
        seq = seq.with_joint_map(map)?;
    }
    Ok(seq)
}

fn parse_opt_int(key: &str, v: &str) -> Result<Option<i64>> {
    let v = v.trim();
    if v.is_empty() || v == "null" {
        return Ok(None);
    }
    v.parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad integer for {key}: {v:?}")))
}

fn parse_joint_map(v: &str) -> Result<JointMap> {
    let mut idx = [None; 4];
    for part in v.split(';').filter(|p| !p.trim().is_empty()) {
        let (k, n) = part
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bad joint_map entry {part:?}")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad joint index in {part:?}")))?;
        let slot = match k.trim() {
            "root" => 0,
            "spine" => 1,
            "hip_left" => 2,
            "hip_right" => 3,
            other => return Err(Error::Parse(format!("unknown joint_map key {other:?}"))),
        };
        idx[slot] = Some(n);
    }
    match idx {
        [Some(root), Some(spine), Some(hip_left), Some(hip_right)] => Ok(JointMap {
            root,
            spine,
            hip_left,
            hip_right,
        }),
        _ => Err(Error::InvalidJointMap("joint_map needs root, spine, hip_left, hip_right".into())),
    }
}

fn parse_csv<T: Scalar>(text: &str) -> Result<ActionSequence<T>> {
    let mut id = None;
    let (mut label, mut subject, mut view, mut joint_map, mut num_joints) =
        (None, None, None, None, None);
    for line in text.lines().filter_map(|l| l.trim().strip_prefix('#')) {
        let Some((k, v)) = line.split_once('=') else { continue };
        let (k, v) = (k.trim(), v.trim());
        match k {
            "id" => id = Some(v.to_string()),
            "label" => label = parse_opt_int(k, v)?,
            "subject" => subject = parse_opt_int(k, v)?,
            "view" => view = parse_opt_int(k, v)?,
            "num_joints" => {
                num_joints = Some(
                    v.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad num_joints {v:?}")))?,
                )
            }
            "joint_map" => joint_map = Some(parse_joint_map(v)?),
            _ => {}
        }
    }
    let num_joints = num_joints.ok_or_else(|| Error::Parse("missing num_joints".into()))?;
    if num_joints == 0 {
        return Err(Error::Parse("num_joints must be positive".into()));
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut cells: Vec<Option<Joint<f64>>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::Parse(format!("expected 5 columns, got {}", rec.len())));
        }
        let t: usize = rec[0].parse().map_err(|_| Error::Parse(format!("bad frame {:?}", &rec[0])))?;
        let j: usize = rec[1].parse().map_err(|_| Error::Parse(format!("bad joint {:?}", &rec[1])))?;
        if j >= num_joints {
            return Err(Error::Parse(format!("joint {j} >= num_joints {num_joints}")));
        }
        let mut p = [0.0; 3];
        for axis in 0..3 {
            let v: f64 = rec[2 + axis]
                .parse()
                .map_err(|_| Error::Parse(format!("bad coordinate {:?}", &rec[2 + axis])))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCoordinate { t, joint: j, axis });
            }
            p[axis] = v;
        }
        let k = t * num_joints + j;
        if cells.len() <= k {
            cells.resize(k + 1, None);
        }
        if cells[k].replace(p).is_some() {
            return Err(Error::Parse(format!("duplicate keypoint (t={t}, joint={j})")));
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptySequence);
    }
    let frames_n = cells.len().div_ceil(num_joints);
    cells.resize(frames_n * num_joints, None);
    let mut frames = Vec::with_capacity(frames_n);
    for t in 0..frames_n {
        let mut f = Vec::with_capacity(num_joints);
        for j in 0..num_joints {
            let p = cells[t * num_joints + j]
                .ok_or_else(|| Error::Parse(format!("missing keypoint (t={t}, joint={j})")))?;
            f.push(p.map(T::lit));
        }
        frames.push(f);
    }
    let id = id.unwrap_or_default();
    finish(id, label, subject, view, joint_map, frames)
}

pub fn save_sequence_json<T: Scalar>(seq: &ActionSequence<T>, path: &Path) -> Result<()> {
    let out = SequenceFileOut {
        id: &seq.id,
        label: seq.label,
        subject: seq.subject,
        view: seq.view,
        num_joints: seq.num_joints(),
        joint_map: seq.joint_map,
        frames: seq
            .frames()
            .map(|f| f.iter().map(|p| p.map(|v| v.as_f64())).collect())
            .collect(),
    };
    let text = serde_json::to_string(&out)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub split: Split,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(entries)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every sequence listed in a manifest. Relative paths resolve
/// against the manifest's directory.
pub fn load_dataset<T: Scalar>(manifest: &Path) -> Result<Dataset<T>> {
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let entries = load_manifest(manifest)?;
    let mut samples = Vec::with_capacity(entries.len());
    for e in entries {
        let p = if e.path.is_absolute() {
            e.path.clone()
        } else {
            base.join(&e.path)
        };
        let format = SequenceFormat::from_path(&p).unwrap_or(SequenceFormat::Json);
        let sequence = load_sequence(&p, format)?;
        samples.push(Sample {
            sequence,
            split: e.split,
        });
    }
    Ok(Dataset::new(samples, manifest.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn well_formed_json_keeps_declared_shape() {
        let dir = tempfile::tempdir().unwrap();
        let frame = "[[0,0,0],[0,1,0],[-1,0,0],[1,0,0],[0.5,0.5,0.5]]";
        let text = format!(
            r#"{{"id":"a","label":2,"subject":null,"view":1,"num_joints":5,
               "joint_map":{{"root":0,"spine":1,"hip_left":2,"hip_right":3}},
               "frames":[{frame},{frame}]}}"#
        );
        let p = write(dir.path(), "a.json", &text);
        let s: ActionSequence<f64> = load_sequence(&p, SequenceFormat::Json).unwrap();
        assert_eq!((s.len(), s.num_joints()), (2, 5));
        assert_eq!(s.label, Some(2));
        assert_eq!(s.view, Some(1));
        assert_eq!(s.frame(1)[4], [0.5, 0.5, 0.5]);
    }

    #[test]
    fn json_null_coordinate_is_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "n.json",
            r#"{"id":"n","num_joints":1,"frames":[[[0,0,0]],[[1,null,0]]]}"#,
        );
        let err = load_sequence::<f64>(&p, SequenceFormat::Json).unwrap_err();
        assert_eq!(err.to_string(), "non-finite coordinate at (1, 0, 1)");
    }

    #[test]
    fn csv_nan_coordinate_is_reported_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "n.csv",
            "#id=n\n#num_joints=2\nt,joint,x,y,z\n0,0,0,0,0\n0,1,1,1,1\n1,0,0,0,NaN\n1,1,0,0,0\n",
        );
        let err = load_sequence::<f64>(&p, SequenceFormat::Csv).unwrap_err();
        assert_eq!(err.to_string(), "non-finite coordinate at (1, 0, 2)");
    }

    #[test]
    fn empty_frame_list_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.json", r#"{"id":"e","num_joints":3,"frames":[]}"#);
        let err = load_sequence::<f64>(&p, SequenceFormat::Json).unwrap_err();
        assert_eq!(err.to_string(), "empty sequence");
    }

    #[test]
    fn csv_matches_json() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "#id=c\n#label=1\n#num_joints=4\n#joint_map=root:0;spine:1;hip_left:2;hip_right:3\n\
                   t,joint,x,y,z\n0,0,0,0,0\n0,1,0,1,0\n0,2,-1,0,0\n0,3,1,0,0\n";
        let p = write(dir.path(), "c.csv", csv);
        let s: ActionSequence<f64> = load_sequence(&p, SequenceFormat::Csv).unwrap();
        let q = dir.path().join("c.json");
        save_sequence_json(&s, &q).unwrap();
        let back: ActionSequence<f64> = load_sequence(&q, SequenceFormat::Json).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.joint_map.unwrap().hip_left, 2);
    }

    #[test]
    fn manifest_resolves_relative_paths_and_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.json", r#"{"id":"a","num_joints":1,"frames":[[[1,2,3]]]}"#);
        let m = dir.path().join("manifest.json");
        write_manifest(
            &[
                ManifestEntry { path: "a.json".into(), split: Split::Train },
                ManifestEntry { path: "a.json".into(), split: Split::Test },
            ],
            &m,
        )
        .unwrap();
        let ds: Dataset<f64> = load_dataset(&m).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[1].split, Split::Test);

        write_manifest(&[ManifestEntry { path: "missing.json".into(), split: Split::Train }], &m)
            .unwrap();
        let err = load_dataset::<f64>(&m).unwrap_err().to_string();
        assert!(err.contains("missing.json"), "{err}");
    }
}
