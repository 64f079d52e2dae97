use std::fs;
use std::path::{Path, PathBuf};

use pandc::features::AecConfig;
use pandc::skeleton::{PreprocessConfig, SynthSpec};
use pandc::train::TrainConfig;
use pandc::DecoderStrategy;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub strategy: DecoderStrategy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 1024,
            layers: 3,
            strategy: DecoderStrategy::FixedWeights,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Raw dataset manifest read by `preprocess`.
    pub manifest: Option<PathBuf>,
    /// Processed archive read by every model command.
    pub processed: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpSearchConfig {
    pub hidden: Vec<usize>,
}

impl Default for HpSearchConfig {
    fn default() -> Self {
        Self { hidden: vec![4, 256] }
    }
}

/// Everything a run needs. The top-level `seed` is copied into every
/// component, so one number pins the whole experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub precision: Precision,
    pub data: DataPaths,
    pub synth: SynthSpec,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub aec: AecConfig,
    pub hpsearch: HpSearchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            precision: Precision::F32,
            data: DataPaths::default(),
            synth: SynthSpec::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            aec: AecConfig::default(),
            hpsearch: HpSearchConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "config schema {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    /// Propagates the experiment seed and validates the pieces that can be
    /// checked before any data is read.
    pub fn finalize(mut self) -> Result<Self, CliError> {
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self.aec.seed = self.seed;
        self.train.validate().map_err(CliError::from_core_as_usage)?;
        if self.model.hidden == 0 || self.model.layers == 0 {
            return Err(CliError::usage("model hidden size and layer count must be positive"));
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        Ok(self)
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn processed_path(&self) -> PathBuf {
        self.data.processed.clone().unwrap_or_else(|| self.out_file(PROCESSED))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.data.checkpoint.clone().unwrap_or_else(|| self.out_file(CHECKPOINT))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.data.manifest.clone().unwrap_or_else(|| self.out_file(MANIFEST))
    }
}

pub const MANIFEST: &str = "manifest.json";
pub const PROCESSED: &str = "processed.json";
pub const NORMSTATS: &str = "normstats.json";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const TRAINLOG: &str = "trainlog.csv";
pub const METRICS: &str = "metrics.json";
pub const CONFUSION: &str = "confusion.csv";
pub const PCA: &str = "pca.csv";
pub const FEATURES: &str = "features.csv";
pub const HPSEARCH: &str = "hpsearch.json";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"schema": 1, "seed": 4, "model": {"hidden": 16, "strategy": "FS"}}"#).unwrap();
        assert_eq!(cfg.model.hidden, 16);
        assert_eq!(cfg.model.layers, 3);
        assert_eq!(cfg.model.strategy, DecoderStrategy::FixedStates);
        let cfg = cfg.finalize().unwrap();
        assert_eq!((cfg.synth.seed, cfg.train.seed, cfg.aec.seed), (4, 4, 4));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"schema": 1, "sead": 4}"#).is_err());
    }
}
