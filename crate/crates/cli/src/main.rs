//! `mstree`: stage-wise command-line pipeline. Every stage reads and writes
//! MST1 columnar files and leaves a `<output>.manifest.json` beside its
//! primary output.

mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mstree_core::pipeline::PipelineConfig;
use mstree_core::{Error, ErrorCategory, Result};

#[derive(Parser, Debug)]
#[command(name = "mstree", version, about = "Tree point extraction from dual-wavelength airborne LiDAR")]
pub struct Cli {
    /// TOML pipeline configuration; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Global seed (overrides the config file and MSTREE_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct InOut {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read LAS files into one dual-channel columnar cloud.
    Ingest(stages::IngestArgs),
    /// Per-channel statistical outlier removal.
    Denoise(stages::DenoiseArgs),
    /// Cross-channel reflectance interpolation.
    Merge(stages::MergeArgs),
    /// Cloth-simulation ground filtering.
    Ground(stages::GroundArgs),
    /// Terrain model and height above ground.
    NormalizeHeight(stages::NormalizeArgs),
    /// Derive the pNDVI column.
    Features(InOut),
    /// Voxel-grid subsampling with label majority vote.
    Subsample(stages::SubsampleArgs),
    /// Tile-based train / val / test assignment.
    Split(stages::SplitArgs),
    /// Train the point classifier on the train split.
    Train(stages::TrainArgs),
    /// Predict labels with a trained model.
    Predict(stages::PredictArgs),
    /// Validate an external label file against a cloud.
    ImportPred(stages::ImportArgs),
    /// Score predictions against reference labels.
    Evaluate(stages::EvaluateArgs),
    /// Train and score every feature configuration.
    Ablate(stages::AblateArgs),
    /// Generate a labeled synthetic scene.
    Synth(stages::SynthArgs),
    /// Write a cloud (optionally with predictions) as LAS 1.4.
    Export(stages::ExportArgs),
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("config {}: {}", p.display(), e.message())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let mut cfg = load_config(&cli)?;
    use Command::*;
    match cli.command {
        Ingest(a) => stages::ingest(&a, &mut cfg),
        Denoise(a) => stages::denoise(&a, &mut cfg),
        Merge(a) => stages::merge(&a, &mut cfg),
        Ground(a) => stages::ground(&a, &mut cfg),
        NormalizeHeight(a) => stages::normalize_height(&a, &mut cfg),
        Features(a) => stages::features(&a, &mut cfg),
        Subsample(a) => stages::subsample(&a, &mut cfg),
        Split(a) => stages::split(&a, &mut cfg),
        Train(a) => stages::train(&a, &mut cfg),
        Predict(a) => stages::predict(&a, &mut cfg),
        ImportPred(a) => stages::import_pred(&a, &mut cfg),
        Evaluate(a) => stages::evaluate(&a, &mut cfg),
        Ablate(a) => stages::ablate(&a, &mut cfg),
        Synth(a) => stages::synth(&a, &mut cfg),
        Export(a) => stages::export(&a, &mut cfg),
    }
}

fn exit_code(cat: ErrorCategory) -> u8 {
    match cat {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("mstree: error category={} kind={}: {detail}", e.category().as_str(), e.kind());
            ExitCode::from(exit_code(e.category()))
        }
    }
}
