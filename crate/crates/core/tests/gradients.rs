mod common;

use common::random_input;
use pandc::features::Autoencoder;
use pandc::recurrent::RecurrentModel;
use pandc::train::gradcheck::{autoencoder_gradient_error, recurrent_gradient_error, relative_error};
use pandc::{DecoderStrategy, LossKind, ModelDims};

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn toy(strategy: DecoderStrategy, mask: &[bool], kind: LossKind) -> f64 {
    let (j, hidden) = (2, 8);
    let mut model = RecurrentModel::<f64>::init(ModelDims::new(3 * j, hidden, 3, strategy), 11).unwrap();
    let x = random_input(mask.len(), 3 * j, 5);
    recurrent_gradient_error(&mut model, &x, mask, kind, STEP).unwrap()
}

#[test]
fn relative_error_uses_an_absolute_floor_for_tiny_gradients() {
    assert_eq!(relative_error(2.0, 1.0), 0.5);
    assert!((relative_error(1e-9, 0.0) - 1e-5).abs() < 1e-18);
}

#[test]
fn fixed_weights_bptt_matches_finite_differences() {
    let e = toy(DecoderStrategy::FixedWeights, &[true; 5], LossKind::Mse);
    assert!(e <= TOL, "max relative error {e:e}");
}

#[test]
fn fixed_states_bptt_matches_finite_differences() {
    let e = toy(DecoderStrategy::FixedStates, &[true; 5], LossKind::Mse);
    assert!(e <= TOL, "max relative error {e:e}");
}

#[test]
fn padded_steps_are_differentiated_correctly() {
    let mask = [true, true, true, false, false];
    for s in [DecoderStrategy::FixedWeights, DecoderStrategy::FixedStates] {
        let e = toy(s, &mask, LossKind::Mse);
        assert!(e <= TOL, "{s}: max relative error {e:e}");
    }
}

#[test]
fn mae_loss_gradient_matches_away_from_kinks() {
    let e = toy(DecoderStrategy::FixedStates, &[true; 5], LossKind::Mae);
    assert!(e <= TOL, "max relative error {e:e}");
}

#[test]
fn autoencoder_backprop_matches_finite_differences() {
    let mut aec = Autoencoder::<f64>::random(&[12, 8, 6, 4, 6, 8, 12], 2).unwrap();
    let x = random_input(1, 12, 9).into_vec();
    let e = autoencoder_gradient_error(&mut aec, &x, STEP).unwrap();
    assert!(e <= TOL, "max relative error {e:e}");
}

