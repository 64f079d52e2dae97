//! Desk-scale run of the full pipeline on generated data: train, evaluate,
//! compress with the feature autoencoder, and report where the decoder's
//! reconstruction error sits along the sequence.
//!
//! Usage: `synthetic_experiment [hidden] [iterations] [batch] [lr] [noise] [seed] [FW|FS]`
//!
//! `AEC_EPOCHS` and `AEC_LR` override the autoencoder schedule.

use std::time::Instant;

use pandc::features::{compress_features, evaluate, extract_features, partition, train_autoencoder, AecConfig};
use pandc::recurrent::RecurrentModel;
use pandc::skeleton::{generate_synthetic, preprocess, Dataset, PreprocessConfig, Split, SynthSpec};
use pandc::train::{model_inputs, train_with, TrainConfig};
use pandc::{DecoderStrategy, ModelDims};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn env<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn accuracy(m: &RecurrentModel<f32>, data: &Dataset<f32>) -> pandc::Result<f64> {
    let (train, test) = partition(&extract_features(&m.encoder, data)?);
    Ok(evaluate(&train, &test)?.accuracy)
}

/// MSE of predicting all zeros, and of predicting the per-coordinate mean pose.
fn baselines(data: &Dataset<f32>) -> (f64, f64) {
    let inputs = model_inputs(data, Split::Train);
    let rows: Vec<&[f32]> = inputs
        .iter()
        .flat_map(|(x, m)| (0..x.rows()).filter(|&t| m[t]).map(move |t| x.row(t)))
        .collect();
    let d = rows[0].len();
    let n = (rows.len() * d) as f64;
    let mut mean = vec![0.0f64; d];
    for r in &rows {
        mean.iter_mut().zip(*r).for_each(|(m, &v)| *m += v as f64 / rows.len() as f64);
    }
    let zero = rows.iter().flat_map(|r| r.iter()).map(|&v| (v as f64).powi(2)).sum::<f64>() / n;
    let centred = rows
        .iter()
        .flat_map(|r| r.iter().zip(&mean).map(|(&v, m)| (v as f64 - m).powi(2)))
        .sum::<f64>()
        / n;
    (zero, centred)
}

fn per_frame_error(model: &RecurrentModel<f32>, data: &Dataset<f32>) -> pandc::Result<Vec<f64>> {
    let inputs = model_inputs(data, Split::Train);
    let mut per = vec![0.0f64; inputs[0].0.rows()];
    for (x, m) in &inputs {
        let y = model.reconstruct(x, m)?;
        for (t, e) in per.iter_mut().enumerate() {
            let sq: f64 = x.row(t).iter().zip(y.row(t)).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
            *e += sq / (x.cols() * inputs.len()) as f64;
        }
    }
    Ok(per)
}

fn main() -> pandc::Result<()> {
    let hidden: usize = arg(1, 24);
    let iterations: usize = arg(2, 2000);
    let batch: usize = arg(3, 16);
    let lr: f64 = arg(4, 1e-3);
    let noise: f64 = arg(5, 1.0);
    let seed: u64 = arg(6, 0);
    let strategy: DecoderStrategy = arg(7, DecoderStrategy::FixedWeights);

    let spec = SynthSpec { noise, seed, ..Default::default() };
    let raw = generate_synthetic::<f32>(&spec)?;
    let data = preprocess(&raw, &PreprocessConfig::default(), None)?.dataset;
    let j = data.check_uniform(None)?;
    let model = RecurrentModel::<f32>::init(ModelDims::new(3 * j, hidden, 3, strategy), seed)?;

    let (zero, centred) = baselines(&data);
    println!("zero-predictor mse {zero:.5}; mean-pose mse {centred:.5}");
    println!("untrained accuracy {:.3}", accuracy(&model, &data)?);

    let cfg = TrainConfig {
        batch_size: batch,
        learning_rate: lr,
        max_iterations: iterations,
        eval_interval: (iterations / 10).max(1),
        seed,
        ..Default::default()
    };
    let start = Instant::now();
    let (model, log) = train_with(model, &data, &cfg, |r| {
        if let Some(a) = r.accuracy {
            println!("iter {:5} loss {:.5} acc {:.3}", r.iteration, r.loss, a);
        }
    })?;

    let per = per_frame_error(&model, &data)?;
    let every5: Vec<String> = per.iter().step_by(5).map(|v| format!("{v:.4}")).collect();
    println!("per-frame mse every 5th frame: {}", every5.join(" "));

    let records = extract_features(&model.encoder, &data)?;
    let (train, test) = partition(&records);
    let raw_acc = evaluate(&train, &test)?.accuracy;
    let feats: Vec<Vec<f32>> = train.iter().map(|r| r.feature.clone()).collect();
    let aec_cfg = AecConfig {
        epochs: env("AEC_EPOCHS", 200),
        learning_rate: env("AEC_LR", 1e-3),
        batch_size: 16,
        seed,
        ..Default::default()
    };
    let (aec, alog) = train_autoencoder(&feats, &aec_cfg)?;
    let (ctrain, ctest) = partition(&compress_features(&aec, &records)?);
    let aec_acc = evaluate(&ctrain, &ctest)?.accuracy;
    println!(
        "aec error {:.4} -> {:.4}; raw accuracy {raw_acc:.3}, bottleneck accuracy {aec_acc:.3}",
        alog.initial_error, alog.final_error
    );

    let (first, last) = (log.mean_loss(100, false), log.mean_loss(100, true));
    println!(
        "loss {first:.5} -> {last:.5} (ratio {:.3}); {:.0}s",
        last / first,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
