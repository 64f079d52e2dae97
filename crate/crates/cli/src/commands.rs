use std::fs;
use std::path::Path;

use pandc::features::{
    compress_features, evaluate, extract_features, partition, pca_project, projection_to_csv,
    train_autoencoder, write_features_csv, AecLog, FeatureRecord,
};
use pandc::recurrent::{load_checkpoint, save_checkpoint, RecurrentModel};
use pandc::skeleton::{
    generate_synthetic, load_dataset, load_processed, preprocess as run_preprocess, save_processed,
    save_sequence_json, write_manifest, Dataset, ManifestEntry, Split,
};
use pandc::train::{hyperparam_search, train_with, Candidate};
use pandc::{Matrix, ModelDims, Scalar};
use serde::Serialize;

use crate::config::*;
use crate::error::CliError;
use crate::{FeatureKind, PcaKind};

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn load_data<T: Scalar>(cfg: &ExperimentConfig) -> Result<Dataset<T>, CliError> {
    Ok(load_processed(&cfg.processed_path())?.0)
}

pub fn synth(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let ds = generate_synthetic::<f64>(&cfg.synth)?;
    let dir = cfg.out_file("sequences");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    let mut entries = Vec::with_capacity(ds.len());
    for s in &ds.samples {
        let rel = Path::new("sequences").join(format!("{}.json", s.sequence.id));
        save_sequence_json(&s.sequence, &cfg.out.join(&rel))?;
        entries.push(ManifestEntry { path: rel, split: s.split });
    }
    write_manifest(&entries, &cfg.out_file(MANIFEST))?;
    println!("wrote {} sequences and {}", entries.len(), cfg.out_file(MANIFEST).display());
    Ok(())
}

pub fn preprocess<T: Scalar>(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let raw = load_dataset::<T>(&cfg.manifest_path())?;
    let p = run_preprocess(&raw, &cfg.preprocess, None)?;
    for (id, reason) in &p.skipped {
        eprintln!("warning: skipped {id}: {reason}");
    }
    save_processed(&p.dataset, &p.stats, &cfg.out_file(PROCESSED))?;
    write_json(&cfg.out_file(NORMSTATS), &p.stats)?;
    println!(
        "processed {} sequences ({} skipped) to {} frames",
        p.dataset.len(),
        p.skipped.len(),
        cfg.preprocess.t_max
    );
    Ok(())
}

pub fn train<T: Scalar>(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let ds = load_data::<T>(cfg)?;
    let joints = ds.check_uniform(None)?;
    let dims = ModelDims::new(3 * joints, cfg.model.hidden, cfg.model.layers, cfg.model.strategy);
    let model = RecurrentModel::<T>::init(dims, cfg.seed)?;
    let (model, log) = train_with(model, &ds, &cfg.train, |r| {
        if let Some(a) = r.accuracy {
            println!("iteration {} loss {:.6} accuracy {:.4}", r.iteration, r.loss, a);
        }
    })?;
    save_checkpoint(&model, cfg.seed, &cfg.out_file(CHECKPOINT))?;
    log.write_csv(&cfg.out_file(TRAINLOG))?;
    if let Some(last) = log.records.last() {
        println!("final loss {:.6} after {} iterations", last.loss, last.iteration);
    }
    Ok(())
}

struct Features<T> {
    records: Vec<FeatureRecord<T>>,
    aec: Option<AecLog>,
}

fn features<T: Scalar>(
    cfg: &ExperimentConfig,
    model: &RecurrentModel<T>,
    ds: &Dataset<T>,
    kind: FeatureKind,
) -> Result<Features<T>, CliError> {
    let raw = extract_features(&model.encoder, ds)?;
    match kind {
        FeatureKind::Raw => Ok(Features { records: raw, aec: None }),
        FeatureKind::Aec => {
            let train: Vec<Vec<T>> = raw
                .iter()
                .filter(|r| r.split == Split::Train)
                .map(|r| r.feature.clone())
                .collect();
            let (aec, log) = train_autoencoder(&train, &cfg.aec)?;
            Ok(Features { records: compress_features(&aec, &raw)?, aec: Some(log) })
        }
    }
}

fn load_model<T: Scalar>(cfg: &ExperimentConfig, ds: &Dataset<T>) -> Result<RecurrentModel<T>, CliError> {
    let (model, _) = load_checkpoint::<T>(&cfg.checkpoint_path())?;
    let joints = ds.check_uniform(None)?;
    if model.dims().input_dim != 3 * joints {
        return Err(CliError::usage(format!(
            "checkpoint expects {} inputs per frame but the data has {}",
            model.dims().input_dim,
            3 * joints
        )));
    }
    Ok(model)
}

#[derive(Serialize)]
struct Metrics {
    accuracy: f64,
    features: &'static str,
    feature_dim: usize,
    train_records: usize,
    test_records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    aec: Option<AecLog>,
}

pub fn eval<T: Scalar>(cfg: &ExperimentConfig, kind: FeatureKind, pca: PcaKind) -> Result<(), CliError> {
    let ds = load_data::<T>(cfg)?;
    let model = load_model(cfg, &ds)?;
    let feats = features(cfg, &model, &ds, kind)?;
    let (train, test) = partition(&feats.records);
    let ev = evaluate(&train, &test)?;
    ev.confusion.write_csv(&cfg.out_file(CONFUSION))?;
    let metrics = Metrics {
        accuracy: ev.accuracy,
        features: match kind {
            FeatureKind::Raw => "raw",
            FeatureKind::Aec => "aec",
        },
        feature_dim: feats.records.first().map_or(0, |r| r.feature.len()),
        train_records: train.len(),
        test_records: test.len(),
        aec: feats.aec,
    };
    write_json(&cfg.out_file(METRICS), &metrics)?;
    match pca {
        PcaKind::None => {}
        PcaKind::Features => {
            let rows: Vec<Vec<T>> = feats.records.iter().map(|r| r.feature.clone()).collect();
            let ids: Vec<String> = feats.records.iter().map(|r| r.name.clone()).collect();
            let labels: Vec<i64> = feats.records.iter().map(|r| r.label).collect();
            let p = pca_project(&Matrix::from_rows(&rows), 3)?;
            write_text(&cfg.out_file(PCA), &projection_to_csv(&ids, &labels, &p))?;
        }
        PcaKind::Trajectories => {
            let (mut rows, mut ids, mut labels) = (Vec::new(), Vec::new(), Vec::new());
            for s in ds.split(Split::Test) {
                let seq = &s.sequence;
                let state = model.encoder.encode(&seq.flatten(), seq.mask())?;
                let traj = state.trajectory.expect("encode records the trajectory");
                for t in (0..traj.rows()).filter(|&t| seq.mask()[t]) {
                    rows.push(traj.row(t).to_vec());
                    ids.push(format!("{}:{t}", seq.id));
                    labels.push(seq.label.unwrap_or(-1));
                }
            }
            let p = pca_project(&Matrix::from_rows(&rows), 3)?;
            write_text(&cfg.out_file(PCA), &projection_to_csv(&ids, &labels, &p))?;
        }
    }
    println!("accuracy {:.4} over {} test sequences", ev.accuracy, test.len());
    Ok(())
}

pub fn export_features<T: Scalar>(cfg: &ExperimentConfig, kind: FeatureKind) -> Result<(), CliError> {
    let ds = load_data::<T>(cfg)?;
    let model = load_model(cfg, &ds)?;
    let feats = features(cfg, &model, &ds, kind)?;
    write_features_csv(&feats.records, &cfg.out_file(FEATURES))?;
    println!("wrote {} feature vectors to {}", feats.records.len(), cfg.out_file(FEATURES).display());
    Ok(())
}

pub fn hpsearch<T: Scalar>(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let ds = load_data::<T>(cfg)?;
    let space: Vec<Candidate> = cfg
        .hpsearch
        .hidden
        .iter()
        .map(|&h| Candidate {
            name: format!("H{h}"),
            hidden: h,
            layers: cfg.model.layers,
            strategy: cfg.model.strategy,
            seed: cfg.seed,
        })
        .collect();
    let ranked = hyperparam_search(&space, &ds)?;
    write_json(&cfg.out_file(HPSEARCH), &ranked)?;
    for r in &ranked {
        println!("{} accuracy {:.4} ({} parameters)", r.candidate.name, r.accuracy, r.parameters);
    }
    Ok(())
}
