use serde::{Deserialize, Serialize};

use super::{ActionSequence, Dataset, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_T_MAX: usize = 50;

/// Brings a sequence to exactly `t_max` frames.
///
/// Longer sequences keep frames `round(i·(T−1)/(t_max−1))`, which always
/// includes the first and last pose. Shorter ones are zero-padded at the end
/// and the padding is marked invalid in the returned sequence's mask.
/// Frames already masked out in the input are dropped first.
pub fn resample<T: Scalar>(seq: &ActionSequence<T>, t_max: usize) -> ActionSequence<T> {
    assert!(t_max >= 1, "t_max must be positive");
    let j = seq.num_joints();
    let real: Vec<usize> = (0..seq.len()).filter(|&t| seq.mask()[t]).collect();
    let n = real.len();
    let mut joints = Vec::with_capacity(t_max * j);
    let mut mask = Vec::with_capacity(t_max);
    if n > t_max {
        let span = t_max - 1;
        for i in 0..t_max {
            // round-half-up of i·(n−1)/span in exact integer arithmetic
            let idx = if span == 0 { 0 } else { (2 * i * (n - 1) + span) / (2 * span) };
            joints.extend_from_slice(seq.frame(real[idx]));
            mask.push(true);
        }
    } else {
        for &t in &real {
            joints.extend_from_slice(seq.frame(t));
            mask.push(true);
        }
        joints.resize(t_max * j, [T::zero(); 3]);
        mask.resize(t_max, false);
    }
    ActionSequence::from_parts(seq, j, joints, mask)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// One min/max pair shared by all three axes (keeps aspect ratio).
    #[default]
    Global,
    PerAxis,
}

/// Range statistics for the affine map onto [−1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mode: NormMode,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl NormStats {
    /// Fits over the real frames of the training split only.
    pub fn fit<T: Scalar>(dataset: &Dataset<T>, mode: NormMode) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut any = false;
        for s in dataset.split(Split::Train) {
            let seq = &s.sequence;
            for (t, frame) in seq.frames().enumerate() {
                if !seq.mask()[t] {
                    continue;
                }
                any = true;
                for p in frame {
                    for a in 0..3 {
                        let v = p[a].as_f64();
                        lo[a] = lo[a].min(v);
                        hi[a] = hi[a].max(v);
                    }
                }
            }
        }
        if !any {
            return Err(Error::EmptyTrainingSet);
        }
        if mode == NormMode::Global {
            let (l, h) = (
                lo.iter().copied().fold(f64::INFINITY, f64::min),
                hi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            );
            lo = [l; 3];
            hi = [h; 3];
        }
        let stats = Self { mode, min: lo, max: hi };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.max[a] > self.min[a]) {
                return Err(Error::ConstantData(self.min[a]));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn apply_value(&self, axis: usize, x: f64) -> f64 {
        2.0 * (x - self.min[axis]) / (self.max[axis] - self.min[axis]) - 1.0
    }

    /// Maps real frames only; padding stays at zero.
    pub fn apply<T: Scalar>(&self, seq: &ActionSequence<T>) -> ActionSequence<T> {
        let mut out = seq.clone();
        for t in 0..out.len() {
            if !seq.mask()[t] {
                continue;
            }
            for p in out.frame_mut(t) {
                for (a, v) in p.iter_mut().enumerate() {
                    *v = T::lit(self.apply_value(a, v.as_f64()));
                }
            }
        }
        out
    }
}

/// Normalizes every split with `stats`, fitting global statistics on the
/// training split when none are supplied. Test values outside the training
/// range are not clamped.
pub fn normalize<T: Scalar>(
    dataset: &Dataset<T>,
    stats: Option<NormStats>,
) -> Result<(Dataset<T>, NormStats)> {
    let stats = match stats {
        Some(s) => {
            s.validate()?;
            s
        }
        None => NormStats::fit(dataset, NormMode::Global)?,
    };
    let samples = dataset
        .samples
        .iter()
        .map(|s| super::Sample {
            sequence: stats.apply(&s.sequence),
            split: s.split,
        })
        .collect();
    Ok((Dataset::new(samples, dataset.provenance.clone()), stats))
}
