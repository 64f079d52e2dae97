use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Principal-component projection of a point cloud.
///
/// Components are unit rows of `components`; each is signed so that its
/// largest-magnitude entry is positive. Directions beyond the rank of the
/// data are zero rows with zero explained variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub projected: Matrix<f64>,
    pub explained_ratio: Vec<f64>,
    pub components: Matrix<f64>,
    pub mean: Vec<f64>,
}

const RANK_TOL: f64 = 1e-12;

pub fn pca_project<T: Scalar>(data: &Matrix<T>, out_dims: usize) -> Result<Pca> {
    let (n, d) = data.shape();
    if n == 0 || n < out_dims {
        return Err(Error::ShapeMismatch {
            context: "pca needs at least out_dims points",
            expected: out_dims.max(1),
            got: n,
        });
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| data.get(i, j).as_f64()).sum::<f64>() / n as f64)
        .collect();
    let xc = DMatrix::from_fn(n, d, |i, j| data.get(i, j).as_f64() - mean[j]);
    let denom = (n.max(2) - 1) as f64;

    // Eigen-decompose whichever of XᵀX (d×d) and XXᵀ (n×n) is smaller.
    let (values, vectors) = if d <= n {
        let eig = SymmetricEigen::new(xc.transpose() * &xc / denom);
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        let eig = SymmetricEigen::new(&xc * xc.transpose() / denom);
        let v = xc.transpose() * &eig.eigenvectors;
        (eig.eigenvalues, v)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let total: f64 = (0..d).map(|j| xc.column(j).norm_squared()).sum::<f64>() / denom;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut components = Matrix::zeros(out_dims, d);
    let mut explained_ratio = vec![0.0; out_dims];
    for (k, &idx) in order.iter().take(out_dims).enumerate() {
        let lambda = values[idx];
        if lambda <= RANK_TOL * scale || total <= 0.0 {
            continue;
        }
        let mut axis: Vec<f64> = vectors.column(idx).iter().copied().collect();
        let len = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let pivot = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let s = pivot.signum() / len;
        axis.iter_mut().for_each(|v| *v *= s);
        components.row_mut(k).copy_from_slice(&axis);
        explained_ratio[k] = lambda / total;
    }

    let mut projected = Matrix::zeros(n, out_dims);
    for i in 0..n {
        let row: Vec<f64> = xc.row(i).iter().copied().collect();
        for k in 0..out_dims {
            let p = crate::linalg::dot(components.row(k), &row);
            projected.set(i, k, p);
        }
    }
    Ok(Pca { projected, explained_ratio, components, mean })
}
