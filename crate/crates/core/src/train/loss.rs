use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Self::Mse),
            "mae" => Ok(Self::Mae),
            _ => Err(Error::InvalidConfig(format!("unknown loss {s:?}"))),
        }
    }
}

fn check<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>, mask: &[bool]) -> Result<usize> {
    if x.shape() != x_hat.shape() {
        return Err(Error::ShapeMismatch {
            context: "reconstruction vs target elements",
            expected: x.rows() * x.cols(),
            got: x_hat.rows() * x_hat.cols(),
        });
    }
    if mask.len() != x.rows() {
        return Err(Error::ShapeMismatch {
            context: "mask length",
            expected: x.rows(),
            got: mask.len(),
        });
    }
    match mask.iter().filter(|&&m| m).count() {
        0 => Err(Error::AllMasked),
        n => Ok(n),
    }
}

/// Mean over real frames of the per-frame mean squared (or absolute) error
/// over all coordinates.
pub fn reconstruction_loss<T: Scalar>(
    x: &Matrix<T>,
    x_hat: &Matrix<T>,
    mask: &[bool],
    kind: LossKind,
) -> Result<T> {
    let n = check(x, x_hat, mask)?;
    let mut total = T::zero();
    for t in (0..x.rows()).filter(|&t| mask[t]) {
        let frame: T = x
            .row(t)
            .iter()
            .zip(x_hat.row(t))
            .map(|(&a, &b)| match kind {
                LossKind::Mse => (a - b) * (a - b),
                LossKind::Mae => (a - b).abs(),
            })
            .sum();
        total += frame;
    }
    Ok(total / T::lit((n * x.cols()) as f64))
}

/// Loss and its gradient with respect to `x_hat`. Padding rows get zero gradient.
pub(crate) fn loss_with_grad<T: Scalar>(
    x: &Matrix<T>,
    x_hat: &Matrix<T>,
    mask: &[bool],
    kind: LossKind,
) -> Result<(T, Matrix<T>)> {
    let loss = reconstruction_loss(x, x_hat, mask, kind)?;
    let n = mask.iter().filter(|&&m| m).count();
    let denom = T::lit((n * x.cols()) as f64);
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for t in (0..x.rows()).filter(|&t| mask[t]) {
        for ((g, &a), &b) in grad.row_mut(t).iter_mut().zip(x.row(t)).zip(x_hat.row(t)) {
            let diff = b - a;
            *g = match kind {
                LossKind::Mse => T::lit(2.0) * diff / denom,
                LossKind::Mae => {
                    if diff > T::zero() {
                        T::one() / denom
                    } else if diff < T::zero() {
                        -T::one() / denom
                    } else {
                        T::zero()
                    }
                }
            };
        }
    }
    Ok((loss, grad))
}
