use std::path::{Path, PathBuf};

use clap::Args;
use log::warn;
use mstree_core::classifier::{height_threshold_postprocess, import_predictions, loss_curve_csv, predict as run_predict, Checkpoint, Prediction, PredictionSource};
use mstree_core::eval::{
    evaluate as run_evaluate, export_error_las, fit_model, reports_to_csv, reports_to_table, run_ablation, ErrorRateMode,
};
use mstree_core::features::{assemble_features, FeatureConfig, NormalizationParams};
use mstree_core::io::labels::format_probabilities;
use mstree_core::io::las::parse_header;
use mstree_core::io::{
    generate_scene_with_layout, read_columnar, read_labels, write_columnar, write_labels, write_las,
    ChannelSource, LasReadOptions, LasWriteOptions, ReflectanceSource,
};
use mstree_core::pipeline::{self, InputSpec, PipelineConfig};
use mstree_core::preprocess::dtm::dtm_to_ascii_grid;
use mstree_core::{Channel, Error, PointCloud, Result, SplitTag};
use serde_json::{json, Map, Value};

use crate::manifest::write_manifest;
use crate::InOut;

fn read_cloud(path: &Path) -> Result<PointCloud> {
    read_columnar(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn notes(pairs: Value) -> Map<String, Value> {
    match pairs {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn finish(stage: &str, cfg: &PipelineConfig, inputs: &[PathBuf], outputs: &[PathBuf], extra: Value) -> Result<()> {
    let seed = cfg.effective_seed()?;
    let mut pinned = cfg.clone();
    pinned.seed = Some(seed);
    write_manifest(stage, &pinned, seed, inputs, outputs, notes(extra))?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------- ingest

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// LAS file of the 532 nm channel.
    #[arg(long)]
    pub green: Vec<PathBuf>,
    /// LAS file of the 1064 nm channel.
    #[arg(long)]
    pub nir: Vec<PathBuf>,
    /// LAS file whose scanner-channel bits tag the channel.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// `intensity` or an extra-bytes attribute name; default: the
    /// `reflectance` attribute if present, else intensity.
    #[arg(long)]
    pub reflectance: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn reflectance_for(bytes: &[u8], choice: Option<&str>) -> Result<ReflectanceSource> {
    if let Some(c) = choice {
        return Ok(ReflectanceSource::parse(c));
    }
    let header = parse_header(bytes)?;
    Ok(if header.extra_names().contains(&"reflectance") {
        ReflectanceSource::ExtraBytes("reflectance".into())
    } else {
        ReflectanceSource::Intensity
    })
}

pub fn ingest(a: &IngestArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let mut specs: Vec<InputSpec> = Vec::new();
    for (paths, ch) in [(&a.green, Some("green")), (&a.nir, Some("nir")), (&a.input, None)] {
        for p in paths {
            specs.push(InputSpec {
                path: p.display().to_string(),
                channel: ch.map(String::from),
                reflectance: a.reflectance.clone(),
            });
        }
    }
    if specs.is_empty() {
        specs = cfg.inputs.clone();
    }
    if specs.is_empty() {
        return Err(Error::InvalidParameter("ingest needs --green/--nir/--input or [[inputs]] in the config".into()));
    }
    cfg.inputs = specs.clone();
    let mut cloud: Option<PointCloud> = None;
    let mut inputs = Vec::new();
    for s in &specs {
        let path = PathBuf::from(&s.path);
        let bytes = std::fs::read(&path)?;
        let channel = match &s.channel {
            Some(c) => ChannelSource::Fixed(
                Channel::parse(c).ok_or_else(|| Error::InvalidParameter(format!("unknown channel {c:?} for {}", s.path)))?,
            ),
            None => ChannelSource::ScannerChannel,
        };
        let opts = LasReadOptions { reflectance: reflectance_for(&bytes, s.reflectance.as_deref())?, channel };
        let part = mstree_core::io::las::decode_las(&bytes, &opts)?;
        cloud = Some(match cloud {
            None => part,
            Some(c) => c.concat(&part),
        });
        inputs.push(path);
    }
    let cloud = cloud.unwrap();
    cloud.validate()?;
    write_columnar(&cloud, &a.output)?;
    println!(
        "ingest: {} points ({} green, {} nir)",
        cloud.len(),
        cloud.count_channel(Channel::Green532),
        cloud.count_channel(Channel::Nir1064)
    );
    finish("ingest", cfg, &inputs, &[a.output.clone()], json!({"points": cloud.len()}))
}

// ---------------------------------------------------------------- denoise

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub io: InOut,
    #[arg(long)]
    pub sor_k: Option<usize>,
    #[arg(long)]
    pub sor_n_sigma: Option<f64>,
}

pub fn denoise(a: &DenoiseArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(k) = a.sor_k {
        cfg.sor.k = k;
    }
    if let Some(n) = a.sor_n_sigma {
        cfg.sor.n_sigma = n;
    }
    let cloud = read_cloud(&a.io.input)?;
    let (out, removed) = pipeline::denoise(&cloud, &cfg.sor)?;
    write_columnar(&out, &a.io.output)?;
    println!("denoise: kept {} of {} (removed green {}, nir {})", out.len(), cloud.len(), removed[0], removed[1]);
    finish(
        "denoise",
        cfg,
        &[a.io.input.clone()],
        &[a.io.output.clone()],
        json!({"removed_green": removed[0], "removed_nir": removed[1]}),
    )
}

// ---------------------------------------------------------------- merge

#[derive(Args, Debug)]
pub struct MergeArgs {
    #[command(flatten)]
    pub io: InOut,
    #[arg(long)]
    pub merge_radius: Option<f64>,
    #[arg(long)]
    pub merge_k: Option<usize>,
}

pub fn merge(a: &MergeArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(r) = a.merge_radius {
        cfg.merge.radius = r;
    }
    if let Some(k) = a.merge_k {
        cfg.merge.k = k;
    }
    let cloud = read_cloud(&a.io.input)?;
    let out = pipeline::merge(&cloud, &cfg.merge)?;
    let missing = out.cross_missing.as_ref().map_or(0, |m| m.iter().filter(|&&b| b).count());
    write_columnar(&out, &a.io.output)?;
    println!("merge: {} points, {} without cross-channel neighbors", out.len(), missing);
    finish("merge", cfg, &[a.io.input.clone()], &[a.io.output.clone()], json!({"cross_missing": missing}))
}

// ---------------------------------------------------------------- ground

#[derive(Args, Debug)]
pub struct GroundArgs {
    #[command(flatten)]
    pub io: InOut,
    #[arg(long)]
    pub csf_resolution: Option<f64>,
    #[arg(long)]
    pub csf_rigidness: Option<u32>,
    #[arg(long)]
    pub csf_iterations: Option<usize>,
    #[arg(long)]
    pub csf_threshold: Option<f64>,
    #[arg(long)]
    pub csf_time_step: Option<f64>,
}

pub fn ground(a: &GroundArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(v) = a.csf_resolution {
        cfg.csf.cloth_resolution = v;
    }
    if let Some(v) = a.csf_rigidness {
        cfg.csf.rigidness = v;
    }
    if let Some(v) = a.csf_iterations {
        cfg.csf.iterations = v;
    }
    if let Some(v) = a.csf_threshold {
        cfg.csf.class_threshold = v;
    }
    if let Some(v) = a.csf_time_step {
        cfg.csf.time_step = v;
    }
    let cloud = read_cloud(&a.io.input)?;
    let out = pipeline::ground(&cloud, &cfg.csf)?;
    let n = out.ground_flag.as_ref().unwrap().iter().filter(|&&g| g).count();
    write_columnar(&out, &a.io.output)?;
    println!("ground: {n} of {} points classified ground", out.len());
    finish("ground", cfg, &[a.io.input.clone()], &[a.io.output.clone()], json!({"ground_points": n}))
}

// ---------------------------------------------------------------- normalize-height

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    #[command(flatten)]
    pub io: InOut,
    #[arg(long)]
    pub dtm_cell: Option<f64>,
    /// Also write the terrain model as an ESRI ASCII grid.
    #[arg(long)]
    pub dtm_out: Option<PathBuf>,
}

pub fn normalize_height(a: &NormalizeArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(c) = a.dtm_cell {
        cfg.dtm.cell = c;
    }
    let cloud = read_cloud(&a.io.input)?;
    let (out, dtm) = pipeline::normalize(&cloud, &cfg.dtm)?;
    write_columnar(&out, &a.io.output)?;
    let mut outputs = vec![a.io.output.clone()];
    if let Some(p) = &a.dtm_out {
        std::fs::write(p, dtm_to_ascii_grid(&dtm))?;
        outputs.push(p.clone());
    }
    println!("normalize-height: DTM {}x{} cells, {} nodata", dtm.width, dtm.height, dtm.width * dtm.height - dtm.valid_cells());
    finish(
        "normalize-height",
        cfg,
        &[a.io.input.clone()],
        &outputs,
        json!({"dtm_width": dtm.width, "dtm_height": dtm.height, "dtm_valid_cells": dtm.valid_cells()}),
    )
}

// ---------------------------------------------------------------- features

pub fn features(a: &InOut, cfg: &mut PipelineConfig) -> Result<()> {
    let cloud = read_cloud(&a.input)?;
    let out = pipeline::spectral(&cloud)?;
    write_columnar(&out, &a.output)?;
    println!("features: pndvi derived for {} points", out.len());
    finish(
        "features",
        cfg,
        &[a.input.clone()],
        &[a.output.clone()],
        json!({"spectral_inputs": "robust-normalized dB reflectance; pndvi from linear reflectance"}),
    )
}

// ---------------------------------------------------------------- subsample

#[derive(Args, Debug)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub io: InOut,
    #[arg(long)]
    pub voxel_grid: Option<f64>,
}

pub fn subsample(a: &SubsampleArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(g) = a.voxel_grid {
        cfg.voxel.grid = g;
    }
    let cloud = read_cloud(&a.io.input)?;
    let out = pipeline::subsample(&cloud, &cfg.voxel)?;
    write_columnar(&out, &a.io.output)?;
    println!("subsample: {} -> {} points", cloud.len(), out.len());
    finish("subsample", cfg, &[a.io.input.clone()], &[a.io.output.clone()], json!({"points": out.len()}))
}

// ---------------------------------------------------------------- split

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[command(flatten)]
    pub io: InOut,
    #[arg(long)]
    pub tile_size: Option<f64>,
    /// Train,val,test fractions.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
}

pub fn split(a: &SplitArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(t) = a.tile_size {
        cfg.split.tile_size = t;
    }
    if let Some(r) = &a.ratios {
        if r.len() != 3 {
            return Err(Error::InvalidParameter(format!("--ratios needs train,val,test; got {} values", r.len())));
        }
        cfg.split.ratios = [r[0], r[1], r[2]];
    }
    let cloud = read_cloud(&a.io.input)?;
    let (out, s) = pipeline::split(&cloud, &cfg.split, cfg.effective_seed()?)?;
    write_columnar(&out, &a.io.output)?;
    let summary = with_suffix(&a.io.output, ".split.json");
    std::fs::write(&summary, serde_json::to_string_pretty(&s)? + "\n")?;
    println!(
        "split: {} tiles, achieved train {:.4} val {:.4} test {:.4}",
        s.tiles.len(),
        s.achieved[0],
        s.achieved[1],
        s.achieved[2]
    );
    finish("split", cfg, &[a.io.input.clone()], &[a.io.output.clone(), summary], json!({"achieved": s.achieved}))
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Checkpoint path; the sidecar and loss curve are written beside it.
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(long)]
    pub feature_config: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub points_per_epoch: Option<usize>,
    /// Early stopping on validation loss.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train on point-wise features only.
    #[arg(long)]
    pub no_neighborhood: bool,
}

fn parse_feature_config(s: &str) -> Result<FeatureConfig> {
    FeatureConfig::parse(s).ok_or_else(|| {
        let names: Vec<&str> = FeatureConfig::ALL.iter().map(|c| c.name()).collect();
        Error::InvalidParameter(format!("unknown feature config {s:?}; expected one of {}", names.join(", ")))
    })
}

pub fn train(a: &TrainArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(c) = &a.feature_config {
        cfg.classify.config = parse_feature_config(c)?;
    }
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = a.weight_decay {
        t.weight_decay = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.points_per_epoch {
        t.points_per_epoch = v;
    }
    if a.patience.is_some() {
        t.patience = a.patience;
    }
    if a.no_neighborhood {
        cfg.features.neighborhood.enabled = false;
    }
    let params = cfg.experiment()?;
    let cloud = read_cloud(&a.input)?;
    let (norm, _, trained) = fit_model(&cloud, cfg.classify.config, &params)?;
    let sidecar = with_suffix(&a.model, ".norm.json");
    let loss = with_suffix(&a.model, ".loss.csv");
    std::fs::write(&sidecar, norm.to_json()? + "\n")?;
    std::fs::write(&loss, loss_curve_csv(&trained.loss_curve))?;
    let ckpt = Checkpoint {
        model: trained.model.clone(),
        feature_config: cfg.classify.config,
        seed: params.train.seed,
        sidecar: sidecar.file_name().unwrap().to_string_lossy().into_owned(),
        class_weights: trained.class_weights,
        train_config: params.train.clone(),
    };
    ckpt.write(&a.model)?;
    let last = trained.loss_curve.last().map(|e| e.train_loss);
    println!(
        "train: {} ({} inputs), {} epochs, final loss {}",
        cfg.classify.config,
        trained.model.d_in(),
        trained.loss_curve.len(),
        last.map_or("n/a".into(), |l| format!("{l:.6}"))
    );
    finish(
        "train",
        cfg,
        &[a.input.clone()],
        &[a.model.clone(), sidecar, loss],
        json!({"class_weights": trained.class_weights, "feature_config": cfg.classify.config.name(),
               "spectral_inputs": "robust-normalized dB reflectance; pndvi from linear reflectance"}),
    )
}

// ---------------------------------------------------------------- predict

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub model: PathBuf,
    /// Label file, one 0/1 per point.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write per-point class probabilities as CSV.
    #[arg(long)]
    pub probabilities: Option<PathBuf>,
    /// Relabel predicted trees below this normalized height.
    #[arg(long)]
    pub postprocess_threshold: Option<f64>,
}

fn load_model(path: &Path) -> Result<(Checkpoint, NormalizationParams, PathBuf)> {
    let ckpt = Checkpoint::read(path)?;
    let sidecar = path.parent().unwrap_or(Path::new(".")).join(&ckpt.sidecar);
    let text = std::fs::read_to_string(&sidecar)
        .map_err(|e| Error::Prerequisite(format!("normalization sidecar {}: {e}", sidecar.display())))?;
    let norm = NormalizationParams::from_json(&text)?;
    if norm.config != ckpt.feature_config || norm.dim() != ckpt.model.d_in() {
        return Err(Error::DimensionMismatch { expected: ckpt.model.d_in(), found: norm.dim() });
    }
    Ok((ckpt, norm, sidecar))
}

pub fn predict(a: &PredictArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if a.postprocess_threshold.is_some() {
        cfg.classify.postprocess_threshold = a.postprocess_threshold;
    }
    let (ckpt, norm, sidecar) = load_model(&a.model)?;
    cfg.classify.config = ckpt.feature_config;
    cfg.features = norm.options;
    let cloud = read_cloud(&a.input)?;
    let x = assemble_features(&cloud, &norm)?;
    let mut pred = run_predict(&x, &ckpt.model)?;
    if let Some(t) = cfg.classify.postprocess_threshold {
        pred = height_threshold_postprocess(&pred, &cloud, t)?;
    }
    write_labels(&pred.labels, &a.output)?;
    let mut outputs = vec![a.output.clone()];
    if let Some(p) = &a.probabilities {
        std::fs::write(p, format_probabilities(&pred.probabilities))?;
        outputs.push(p.clone());
    }
    let trees = pred.labels.iter().filter(|l| **l == mstree_core::Label::Tree).count();
    println!("predict: {trees} of {} points predicted tree", pred.len());
    finish("predict", cfg, &[a.input.clone(), a.model.clone(), sidecar], &outputs, json!({"source": "model"}))
}

// ---------------------------------------------------------------- import-pred

#[derive(Args, Debug)]
pub struct ImportArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// External label file (one 0/1 per point, in cloud order).
    #[arg(short, long)]
    pub labels: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn import_pred(a: &ImportArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let cloud = read_cloud(&a.input)?;
    let text = std::fs::read_to_string(&a.labels)?;
    let pred = import_predictions(&text, &cloud)?;
    write_labels(&pred.labels, &a.output)?;
    println!("import-pred: {} labels accepted", pred.len());
    finish("import-pred", cfg, &[a.input.clone(), a.labels.clone()], &[a.output.clone()], json!({"source": "imported"}))
}

// ---------------------------------------------------------------- evaluate

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Label file from `predict` or `import-pred`.
    #[arg(short, long)]
    pub pred: Option<PathBuf>,
    /// Report path (JSON); a CSV with the same stem is written beside it.
    #[arg(short, long)]
    pub output: PathBuf,
    /// train, val, test or all; default test when the cloud is split.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// all-points or predicted-tree.
    #[arg(long)]
    pub error_rate_mode: Option<String>,
}

fn eval_rows(cloud: &PointCloud, which: Option<&str>) -> Result<(Option<Vec<usize>>, String)> {
    match which {
        Some("all") => Ok((None, "all".into())),
        Some(s) => {
            let tag = SplitTag::parse(s).ok_or_else(|| Error::InvalidParameter(format!("unknown split {s:?}")))?;
            Ok((Some(cloud.split_ids(tag)?), s.to_string()))
        }
        None if cloud.split.is_some() => Ok((Some(cloud.split_ids(SplitTag::Test)?), "test".into())),
        None => Ok((None, "all".into())),
    }
}

pub fn evaluate(a: &EvaluateArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(t) = a.threshold {
        cfg.eval.threshold = t;
    }
    if let Some(m) = &a.error_rate_mode {
        cfg.eval.error_rate_mode =
            ErrorRateMode::parse(m).ok_or_else(|| Error::InvalidParameter(format!("unknown error rate mode {m:?}")))?;
    }
    let pred_path = a
        .pred
        .clone()
        .ok_or_else(|| Error::Prerequisite("evaluate needs predictions: run predict or import-pred and pass --pred".into()))?;
    if !pred_path.exists() {
        return Err(Error::Prerequisite(format!("prediction file {} does not exist", pred_path.display())));
    }
    let cloud = read_cloud(&a.input)?;
    let labels = read_labels(&pred_path, cloud.len())?;
    let pred = Prediction::from_labels(labels, PredictionSource::Imported)?;
    let (rows, scored) = eval_rows(&cloud, a.split.as_deref())?;
    let mut report = run_evaluate(&pred, &cloud, rows.as_deref(), &cfg.eval)?;
    report.context.insert("scored".into(), format!("{scored} split of {}", a.input.display()));
    report.context.insert("seed".into(), cfg.effective_seed()?.to_string());
    std::fs::write(&a.output, serde_json::to_string_pretty(&report)? + "\n")?;
    let csv = a.output.with_extension("csv");
    std::fs::write(&csv, reports_to_csv([&report]))?;
    print!("{}", reports_to_table([&report]));
    finish("evaluate", cfg, &[a.input.clone(), pred_path], &[a.output.clone(), csv], json!({"scored": scored}))
}

// ---------------------------------------------------------------- ablate

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Comma-separated subset of configurations (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub configs: Option<Vec<String>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub points_per_epoch: Option<usize>,
}

pub fn ablate(a: &AblateArgs, cfg: &mut PipelineConfig) -> Result<()> {
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.points_per_epoch {
        cfg.train.points_per_epoch = v;
    }
    let configs: Vec<FeatureConfig> = match &a.configs {
        Some(list) => list.iter().map(|s| parse_feature_config(s)).collect::<Result<_>>()?,
        None => FeatureConfig::ALL.to_vec(),
    };
    let params = cfg.experiment()?;
    let cloud = read_cloud(&a.input)?;
    std::fs::create_dir_all(&a.output)?;
    let csv = a.output.join("ablation.csv");
    let js = a.output.join("ablation.json");
    let table = a.output.join("ablation.txt");
    let write = |r: &mstree_core::eval::AblationResult| -> Result<()> {
        std::fs::write(&csv, reports_to_csv(&r.reports))?;
        std::fs::write(&js, serde_json::to_string_pretty(r)? + "\n")?;
        std::fs::write(&table, reports_to_table(&r.reports))?;
        Ok(())
    };
    let mut done = Vec::new();
    let result = run_ablation(&cloud, &configs, &params, |r| {
        done.push(r.clone());
        if let Err(e) = std::fs::write(&csv, reports_to_csv(&done)) {
            warn!("could not save partial ablation results: {e}");
        }
    });
    let result = match result {
        Ok(r) => r,
        Err((partial, e)) => {
            write(&partial)?;
            return Err(e);
        }
    };
    write(&result)?;
    print!("{}", reports_to_table(&result.reports));
    finish(
        "ablate",
        cfg,
        &[a.input.clone()],
        &[csv.clone(), js.clone(), table.clone()],
        json!({"configs": configs.iter().map(|c| c.name()).collect::<Vec<_>>(), "best": result.best}),
    )
}

// ---------------------------------------------------------------- synth

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write `green.las` and `nir.las` into this directory.
    #[arg(long)]
    pub las_dir: Option<PathBuf>,
    /// Scene width,depth in meters.
    #[arg(long, value_delimiter = ',')]
    pub extent: Option<Vec<f64>>,
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub buildings: Option<usize>,
    #[arg(long)]
    pub scene_seed: Option<u64>,
}

pub fn synth(a: &SynthArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let s = &mut cfg.synth;
    if let Some(e) = &a.extent {
        if e.len() != 2 {
            return Err(Error::InvalidParameter(format!("--extent needs width,depth; got {} values", e.len())));
        }
        s.extent = [e[0], e[1]];
    }
    if let Some(v) = a.slope {
        s.terrain_slope_deg = v;
    }
    if let Some(v) = a.trees {
        s.trees = v;
    }
    if let Some(v) = a.buildings {
        s.buildings = v;
    }
    if let Some(v) = a.scene_seed {
        s.seed = v;
    }
    let scene = generate_scene_with_layout(&cfg.synth)?;
    write_columnar(&scene.cloud, &a.output)?;
    let layout = with_suffix(&a.output, ".layout.json");
    std::fs::write(&layout, serde_json::to_string_pretty(&scene.layout)? + "\n")?;
    let mut outputs = vec![a.output.clone(), layout];
    if let Some(dir) = &a.las_dir {
        std::fs::create_dir_all(dir)?;
        for (ch, name) in [(Channel::Green532, "green.las"), (Channel::Nir1064, "nir.las")] {
            let p = dir.join(name);
            write_las(&scene.cloud.filter_channel(ch), &p, &LasWriteOptions::default())?;
            outputs.push(p);
        }
    }
    println!(
        "synth: {} points ({} tree) over {} x {} m",
        scene.cloud.len(),
        scene.cloud.count_label(mstree_core::Label::Tree),
        cfg.synth.extent[0],
        cfg.synth.extent[1]
    );
    finish("synth", cfg, &[], &outputs, json!({"points": scene.cloud.len()}))
}

// ---------------------------------------------------------------- export

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Predictions: classification takes the predicted label and an
    /// `error_flag` attribute marks 0 correct non-tree, 1 error, 2 correct tree.
    #[arg(short, long)]
    pub pred: Option<PathBuf>,
}

pub fn export(a: &ExportArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let cloud = read_cloud(&a.input)?;
    let mut inputs = vec![a.input.clone()];
    match &a.pred {
        Some(p) => {
            let pred = Prediction::from_labels(read_labels(p, cloud.len())?, PredictionSource::Imported)?;
            export_error_las(&cloud, &pred, &a.output)?;
            inputs.push(p.clone());
        }
        None => write_las(&cloud, &a.output, &LasWriteOptions::default())?,
    }
    println!("export: {} points to {}", cloud.len(), a.output.display());
    finish("export", cfg, &inputs, &[a.output.clone()], Value::Null)
}
