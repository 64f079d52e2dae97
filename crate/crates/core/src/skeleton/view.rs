use super::{ActionSequence, Joint};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum limb length (spine and de-projected hip vectors) accepted when
/// building the canonical frame. Shorter vectors indicate broken tracking.
pub const GEOMETRY_EPS: f64 = 1e-8;

/// Canonical body frame of a sequence: rotation `R` whose columns are the
/// up axis, the de-projected hip axis and their cross product, plus the
/// origin `d_R` (frame-0 root joint).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewInvariantBasis<T> {
    /// Row-major; `rotation[i][k]` is component `i` of column `k`.
    pub rotation: [[T; 3]; 3],
    pub origin: Joint<T>,
}

fn sub<T: Scalar>(a: Joint<T>, b: Joint<T>) -> Joint<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3<T: Scalar>(a: Joint<T>, b: Joint<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale<T: Scalar>(a: Joint<T>, s: T) -> Joint<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross<T: Scalar>(a: Joint<T>, b: Joint<T>) -> Joint<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl<T: Scalar> ViewInvariantBasis<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            origin: [z; 3],
        }
    }

    pub fn column(&self, k: usize) -> Joint<T> {
        [self.rotation[0][k], self.rotation[1][k], self.rotation[2][k]]
    }

    pub fn determinant(&self) -> T {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// max |RᵀR − I| over all entries.
    pub fn orthonormality_error(&self) -> T {
        let mut worst = T::zero();
        for a in 0..3 {
            for b in 0..3 {
                let d = dot3(self.column(a), self.column(b));
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// `R⁻¹ (x − d_R)`; `R` is orthonormal so the inverse is its transpose.
    #[inline]
    pub fn transform(&self, x: Joint<T>) -> Joint<T> {
        let d = sub(x, self.origin);
        [
            dot3(self.column(0), d),
            dot3(self.column(1), d),
            dot3(self.column(2), d),
        ]
    }
}

/// Builds the canonical frame from the root, spine and hip joints of frame 0.
pub fn compute_basis<T: Scalar>(seq: &ActionSequence<T>) -> Result<ViewInvariantBasis<T>> {
    let map = seq.require_joint_map()?;
    let eps = T::lit(GEOMETRY_EPS);
    let f0 = seq.frame(0);
    let root = f0[map.root];
    let v1 = sub(f0[map.spine], root);
    let v2 = sub(f0[map.hip_left], f0[map.hip_right]);

    let n1 = dot3(v1, v1).sqrt();
    if n1 <= eps {
        return Err(Error::DegeneratePose(format!(
            "sequence {}: spine coincides with root in frame 0",
            seq.id
        )));
    }
    let up = scale(v1, T::one() / n1);
    let residual = sub(v2, scale(up, dot3(v2, up)));
    let n2 = dot3(residual, residual).sqrt();
    if n2 <= eps {
        return Err(Error::DegeneratePose(format!(
            "sequence {}: hip axis parallel to spine in frame 0",
            seq.id
        )));
    }
    let side = scale(residual, T::one() / n2);
    let c = cross(up, side);
    let nc = dot3(c, c).sqrt();
    let third = scale(c, T::one() / nc);

    let mut rotation = [[T::zero(); 3]; 3];
    for i in 0..3 {
        rotation[i] = [up[i], side[i], third[i]];
    }
    Ok(ViewInvariantBasis {
        rotation,
        origin: root,
    })
}

/// Maps every real frame into the canonical frame; padded frames stay zero.
pub fn apply_view_invariant<T: Scalar>(
    seq: &ActionSequence<T>,
    basis: &ViewInvariantBasis<T>,
) -> ActionSequence<T> {
    let mut out = seq.clone();
    for t in 0..out.len() {
        if !seq.mask()[t] {
            continue;
        }
        for p in out.frame_mut(t) {
            *p = basis.transform(*p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::JointMap;

    const MAP: JointMap = JointMap {
        root: 0,
        spine: 1,
        hip_left: 2,
        hip_right: 3,
    };

    fn seq(frames: Vec<Vec<Joint<f64>>>) -> ActionSequence<f64> {
        ActionSequence::new("t", frames).unwrap().with_joint_map(MAP).unwrap()
    }

    #[test]
    fn hand_evaluated_basis() {
        let s = seq(vec![vec![
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
        ]]);
        let b = compute_basis(&s).unwrap();
        assert_eq!(b.column(0), [0.0, 1.0, 0.0]);
        assert_eq!(b.column(1), [-1.0, 0.0, 0.0]);
        // (0,1,0) × (−1,0,0) = (0,0,1)
        assert_eq!(b.column(2), [0.0, 0.0, 1.0]);
        assert_eq!(b.origin, [0.0; 3]);
        assert_eq!(b.determinant(), 1.0);
    }

    #[test]
    fn degenerate_poses_are_rejected() {
        let spine_on_root = seq(vec![vec![
            [1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
        ]]);
        assert!(matches!(compute_basis(&spine_on_root), Err(Error::DegeneratePose(_))));

        let hips_along_spine = seq(vec![vec![
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, -1.0, 0.0],
        ]]);
        assert!(matches!(compute_basis(&hips_along_spine), Err(Error::DegeneratePose(_))));
    }

    #[test]
    fn missing_joint_map_is_an_error() {
        let s = ActionSequence::new("nomap", vec![vec![[0.0f64; 3]; 4]]).unwrap();
        assert!(matches!(compute_basis(&s), Err(Error::InvalidJointMap(_))));
    }

    #[test]
    fn identity_basis_leaves_coordinates_unchanged() {
        let s = seq(vec![vec![
            [0.3, -0.2, 0.9],
            [0.1, 1.0, 0.0],
            [-1.0, 0.25, 0.5],
            [1.0, 0.0, -0.125],
        ]]);
        let out = apply_view_invariant(&s, &ViewInvariantBasis::identity());
        assert_eq!(out, s);
    }

    #[test]
    fn frame_zero_root_maps_to_origin() {
        let s = seq(vec![
            vec![[0.3, -0.2, 0.9], [0.4, 1.0, 0.7], [-1.0, 0.25, 0.5], [1.0, 0.0, -0.125]],
            vec![[0.5, -0.1, 0.8], [0.4, 1.1, 0.7], [-1.0, 0.35, 0.5], [1.0, 0.1, -0.125]],
        ]);
        let b = compute_basis(&s).unwrap();
        let out = apply_view_invariant(&s, &b);
        assert_eq!(out.frame(0)[0], [0.0; 3]);
    }
}
