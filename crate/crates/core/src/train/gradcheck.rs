//! Central-difference gradient checking for the recurrent model and the
//! feature autoencoder.

use crate::error::Result;
use crate::features::Autoencoder;
use crate::linalg::Matrix;
use crate::params::Parameters;
use crate::recurrent::RecurrentModel;
use crate::train::LossKind;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn check_tensors(
    analytic: Vec<Vec<f64>>,
    step: f64,
    mut perturb: impl FnMut(usize, usize, f64) -> Result<f64>,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (k, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let plus = perturb(k, i, step)?;
            let minus = perturb(k, i, -step)?;
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * step)));
        }
    }
    Ok(worst)
}

/// Worst relative error between backpropagated gradients and central
/// differences over every trainable parameter of `model`.
pub fn recurrent_gradient_error(
    model: &mut RecurrentModel<f64>,
    x: &Matrix<f64>,
    mask: &[bool],
    kind: LossKind,
    step: f64,
) -> Result<f64> {
    let (grads, _) = model.backward(x, mask, kind)?;
    let analytic = grads.tensors().into_iter().map(<[f64]>::to_vec).collect();
    check_tensors(analytic, step, |k, i, h| {
        let orig = model.tensors_mut()[k][i];
        model.tensors_mut()[k][i] = orig + h;
        let loss = model.loss(x, mask, kind);
        model.tensors_mut()[k][i] = orig;
        loss
    })
}

/// As [`recurrent_gradient_error`] for the autoencoder's mean absolute error.
pub fn autoencoder_gradient_error(aec: &mut Autoencoder<f64>, x: &[f64], step: f64) -> Result<f64> {
    let mut grad = aec.zeros_like();
    aec.backward_into(x, &mut grad)?;
    let analytic = grad.tensors().into_iter().map(<[f64]>::to_vec).collect();
    check_tensors(analytic, step, |k, i, h| {
        let orig = aec.tensors_mut()[k][i];
        aec.tensors_mut()[k][i] = orig + h;
        let err = aec.error(x);
        aec.tensors_mut()[k][i] = orig;
        err
    })
}
