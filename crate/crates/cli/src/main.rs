mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pandc::skeleton::NormMode;
use pandc::{DecoderStrategy, LossKind};

use crate::config::{ExperimentConfig, Precision};
use crate::error::{CliError, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "pandc", version, about = "Unsupervised skeleton action clustering with weak-decoder sequence autoencoders")]
struct Cli {
    /// JSON experiment config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for every artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for batch and evaluation parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled synthetic skeleton dataset and its manifest.
    Synth(SynthArgs),
    /// View-invariant transform, resampling and normalization of a dataset.
    Preprocess(PreprocessArgs),
    /// Train the encoder on the regeneration loss.
    Train(TrainArgs),
    /// 1-NN evaluation of encoder features.
    Eval(EvalArgs),
    /// Rank encoder sizes by untrained 1-NN accuracy.
    Hpsearch(HpArgs),
    /// Write per-sequence feature vectors as CSV.
    ExportFeatures(ExportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    joints: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Render every sequence from the same camera.
    #[arg(long)]
    fixed_view: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    Global,
    PerAxis,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, value_enum)]
    norm_mode: Option<NormArg>,
    /// Keep the original camera frame.
    #[arg(long)]
    no_view_invariant: bool,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Processed archive (default: <out>/processed.json).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    strategy: Option<DecoderStrategy>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    loss: Option<LossKind>,
    /// Iterations between 1-NN evaluations (0 disables them).
    #[arg(long)]
    eval_interval: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeatureKind {
    /// Final encoder state.
    Raw,
    /// Autoencoder bottleneck of the final encoder state.
    Aec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PcaKind {
    None,
    /// One point per sequence feature.
    Features,
    /// One point per time step of every test sequence's last-layer state.
    Trajectories,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint to load (default: <out>/checkpoint.bin).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FeatureKind::Raw)]
    features: FeatureKind,
    #[arg(long)]
    aec_epochs: Option<usize>,
    #[arg(long)]
    aec_lr: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long, value_enum, default_value_t = PcaKind::None)]
    pca: PcaKind,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct HpArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated hidden sizes to compare.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    strategy: Option<DecoderStrategy>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(p) = cli.precision {
        cfg.precision = p;
    }
    let set = |dst: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    match &cli.command {
        Command::Synth(a) => {
            set(&mut cfg.synth.classes, a.classes);
            set(&mut cfg.synth.per_class, a.per_class);
            set(&mut cfg.synth.frames, a.frames);
            set(&mut cfg.synth.joints, a.joints);
            if let Some(n) = a.noise {
                cfg.synth.noise = n;
            }
            if let Some(f) = a.train_fraction {
                cfg.synth.train_fraction = f;
            }
            if a.fixed_view {
                cfg.synth.random_view = false;
            }
            if cfg.synth.classes == 0 || cfg.synth.per_class == 0 || cfg.synth.frames == 0 {
                return Err(CliError::usage("--classes, --per-class and --frames must be at least 1"));
            }
        }
        Command::Preprocess(a) => {
            if a.manifest.is_some() {
                cfg.data.manifest = a.manifest.clone();
            }
            set(&mut cfg.preprocess.t_max, a.t_max);
            if let Some(m) = a.norm_mode {
                cfg.preprocess.norm_mode = match m {
                    NormArg::Global => NormMode::Global,
                    NormArg::PerAxis => NormMode::PerAxis,
                };
            }
            if a.no_view_invariant {
                cfg.preprocess.view_invariant = false;
            }
            if cfg.preprocess.t_max == 0 {
                return Err(CliError::usage("--t-max must be at least 1"));
            }
        }
        Command::Train(a) => {
            apply_model(&mut cfg, &a.model);
            set(&mut cfg.train.max_iterations, a.iterations);
            set(&mut cfg.train.batch_size, a.batch_size);
            set(&mut cfg.train.eval_interval, a.eval_interval);
            if let Some(lr) = a.lr {
                cfg.train.learning_rate = lr;
            }
            if let Some(l) = a.loss {
                cfg.train.loss = l;
            }
        }
        Command::Eval(a) => apply_features(&mut cfg, &a.features),
        Command::ExportFeatures(a) => apply_features(&mut cfg, &a.features),
        Command::Hpsearch(a) => {
            if a.data.is_some() {
                cfg.data.processed = a.data.clone();
            }
            if let Some(h) = &a.hidden {
                cfg.hpsearch.hidden = h.clone();
            }
            set(&mut cfg.model.layers, a.layers);
            if let Some(s) = a.strategy {
                cfg.model.strategy = s;
            }
            if cfg.hpsearch.hidden.is_empty() || cfg.hpsearch.hidden.contains(&0) {
                return Err(CliError::usage("--hidden needs one or more positive sizes"));
            }
        }
    }
    cfg.finalize()
}

fn apply_model(cfg: &mut ExperimentConfig, a: &ModelArgs) {
    if a.data.is_some() {
        cfg.data.processed = a.data.clone();
    }
    if let Some(h) = a.hidden {
        cfg.model.hidden = h;
    }
    if let Some(l) = a.layers {
        cfg.model.layers = l;
    }
    if let Some(s) = a.strategy {
        cfg.model.strategy = s;
    }
}

fn apply_features(cfg: &mut ExperimentConfig, a: &FeatureArgs) {
    if a.data.is_some() {
        cfg.data.processed = a.data.clone();
    }
    if a.checkpoint.is_some() {
        cfg.data.checkpoint = a.checkpoint.clone();
    }
    if let Some(e) = a.aec_epochs {
        cfg.aec.epochs = e;
    }
    if let Some(lr) = a.aec_lr {
        cfg.aec.learning_rate = lr;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot configure {n} threads: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::io(format!("cannot create output directory {}: {e}", cfg.out.display())))?;
    match (&cli.command, cfg.precision) {
        (Command::Synth(_), _) => commands::synth(&cfg),
        (Command::Preprocess(_), Precision::F32) => commands::preprocess::<f32>(&cfg),
        (Command::Preprocess(_), Precision::F64) => commands::preprocess::<f64>(&cfg),
        (Command::Train(_), Precision::F32) => commands::train::<f32>(&cfg),
        (Command::Train(_), Precision::F64) => commands::train::<f64>(&cfg),
        (Command::Eval(a), Precision::F32) => commands::eval::<f32>(&cfg, a.features.features, a.pca),
        (Command::Eval(a), Precision::F64) => commands::eval::<f64>(&cfg, a.features.features, a.pca),
        (Command::Hpsearch(_), Precision::F32) => commands::hpsearch::<f32>(&cfg),
        (Command::Hpsearch(_), Precision::F64) => commands::hpsearch::<f64>(&cfg),
        (Command::ExportFeatures(a), Precision::F32) => commands::export_features::<f32>(&cfg, a.features.features),
        (Command::ExportFeatures(a), Precision::F64) => commands::export_features::<f64>(&cfg, a.features.features),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
