//! Stage wrappers shared by the command-line tool and tests, plus the
//! declarative pipeline configuration.

use log::info;
use serde::{Deserialize, Serialize};

use crate::cloud::{Channel, PointCloud};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, ExperimentParams};
use crate::features::{derive_pndvi, FeatureConfig, FeatureOptions};
use crate::classifier::TrainConfig;
use crate::io::{split_plots, PlotSplit, SyntheticSceneConfig, DEFAULT_SPLIT_RATIOS};
use crate::preprocess::{
    build_dtm, csf_ground, merge_cloud, normalize_height, sor_filter, voxel_subsample, CsfParams, DtmGrid, DtmParams,
    MergeParams, SorParams,
};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "MSTREE_SEED";
pub const FALLBACK_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: String,
    /// `green` / `nir`; when absent the LAS scanner-channel bits decide.
    #[serde(default)]
    pub channel: Option<String>,
    /// `intensity` or the name of an extra-bytes attribute.
    #[serde(default)]
    pub reflectance: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoxelParams {
    pub grid: f64,
}

impl Default for VoxelParams {
    fn default() -> Self {
        Self { grid: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitParams {
    /// Train, val, test.
    pub ratios: [f64; 3],
    pub tile_size: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self { ratios: DEFAULT_SPLIT_RATIOS, tile_size: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyParams {
    pub config: FeatureConfig,
    /// Relabel predicted trees below this height; unset disables it.
    pub postprocess_threshold: Option<f64>,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self { config: FeatureConfig::XyzGreenNir, postprocess_threshold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub inputs: Vec<InputSpec>,
    pub synth: SyntheticSceneConfig,
    pub sor: SorParams,
    pub merge: MergeParams,
    pub csf: CsfParams,
    pub dtm: DtmParams,
    pub voxel: VoxelParams,
    pub split: SplitParams,
    pub features: FeatureOptions,
    pub classify: ClassifyParams,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl PipelineConfig {
    /// Seed from the config, else from [`SEED_ENV`], else [`FALLBACK_SEED`].
    pub fn effective_seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(FALLBACK_SEED),
        }
    }

    /// Experiment parameters with the training seed set to the global seed.
    pub fn experiment(&self) -> Result<ExperimentParams> {
        let mut train = self.train.clone();
        train.seed = self.effective_seed()?;
        Ok(ExperimentParams {
            features: self.features,
            train,
            eval: self.eval,
            postprocess_threshold: self.classify.postprocess_threshold,
        })
    }
}

/// SOR applied to each channel separately; returns the kept points
/// (green first) and the number removed per channel.
pub fn denoise(cloud: &PointCloud, params: &SorParams) -> Result<(PointCloud, [usize; 2])> {
    let mut out: Option<PointCloud> = None;
    let mut removed = [0usize; 2];
    for ch in [Channel::Green532, Channel::Nir1064] {
        let part = cloud.filter_channel(ch);
        if part.is_empty() {
            continue;
        }
        let r = sor_filter(&part, params)?;
        removed[ch.code() as usize] = r.removed.len();
        info!("SOR {ch:?}: removed {} of {} (threshold {:.4} m)", r.removed.len(), part.len(), r.threshold);
        out = Some(match out {
            None => r.kept,
            Some(o) => o.concat(&r.kept),
        });
    }
    out.map(|o| (o, removed)).ok_or_else(|| Error::EmptyInput("nothing to denoise".into()))
}

pub fn merge(cloud: &PointCloud, params: &MergeParams) -> Result<PointCloud> {
    merge_cloud(cloud, params)
}

/// Replaces `ground_flag` with the CSF classification.
pub fn ground(cloud: &PointCloud, params: &CsfParams) -> Result<PointCloud> {
    let mut out = cloud.clone();
    out.ground_flag = Some(csf_ground(cloud, params)?);
    Ok(out)
}

pub fn normalize(cloud: &PointCloud, params: &DtmParams) -> Result<(PointCloud, DtmGrid)> {
    let dtm = build_dtm(cloud, params)?;
    let mut out = cloud.clone();
    out.h_norm = Some(normalize_height(cloud, &dtm)?);
    Ok((out, dtm))
}

/// Adds the pNDVI column.
pub fn spectral(cloud: &PointCloud) -> Result<PointCloud> {
    let mut out = cloud.clone();
    out.pndvi = Some(derive_pndvi(cloud)?);
    Ok(out)
}

pub fn subsample(cloud: &PointCloud, params: &VoxelParams) -> Result<PointCloud> {
    voxel_subsample(cloud, params.grid)
}

pub fn split(cloud: &PointCloud, params: &SplitParams, seed: u64) -> Result<(PointCloud, PlotSplit)> {
    let s = split_plots(cloud, params.ratios, params.tile_size, seed)?;
    let mut out = cloud.clone();
    s.apply(&mut out)?;
    Ok((out, s))
}

/// Every preparation stage in order, from a raw dual-channel cloud to a
/// split cloud ready for training.
pub fn prepare(raw: &PointCloud, cfg: &PipelineConfig) -> Result<PointCloud> {
    let seed = cfg.effective_seed()?;
    let (c, _) = denoise(raw, &cfg.sor)?;
    let c = merge(&c, &cfg.merge)?;
    let c = ground(&c, &cfg.csf)?;
    let (c, _) = normalize(&c, &cfg.dtm)?;
    let c = spectral(&c)?;
    let c = subsample(&c, &cfg.voxel)?;
    let (c, _) = split(&c, &cfg.split, seed)?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.train.epochs, 300);
        assert_eq!(c.voxel.grid, 0.1);
        assert_eq!(c.merge.radius, 1.0);
        assert_eq!(c.merge.k, 7);
        assert_eq!(c.eval.threshold, 2.0);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sor": {"kk": 3}}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn explicit_seed_wins() {
        let c = PipelineConfig { seed: Some(7), ..Default::default() };
        assert_eq!(c.effective_seed().unwrap(), 7);
        assert_eq!(c.experiment().unwrap().train.seed, 7);
    }

    #[test]
    fn prepare_small_scene() {
        let synth = SyntheticSceneConfig {
            extent: [40.0, 40.0],
            trees: 6,
            buildings: 1,
            cables: 1,
            low_vegetation_patches: 3,
            ..Default::default()
        };
        let raw = crate::io::generate_scene(&synth).unwrap();
        let cfg = PipelineConfig { seed: Some(1), split: SplitParams { tile_size: 10.0, ..Default::default() }, ..Default::default() };
        let c = prepare(&raw, &cfg).unwrap();
        c.validate().unwrap();
        assert!(c.h_norm.is_some() && c.pndvi.is_some() && c.split.is_some() && c.ground_flag.is_some());
        assert!(c.len() < raw.len());
    }
}
