//! Train-and-score runs for one or several feature configurations.

use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use super::report::{evaluate, EvalOptions, EvalReport};
use crate::classifier::{height_threshold_postprocess, predict, train, Prediction, TrainConfig, TrainedModel};
use crate::cloud::{PointCloud, SplitTag};
use crate::error::{Error, Result};
use crate::features::{
    apply_normalization, fit_normalization, raw_features, training_rows, FeatureConfig, FeatureMatrix, FeatureOptions,
    NormalizationParams,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub features: FeatureOptions,
    pub train: TrainConfig,
    pub eval: EvalOptions,
    /// Relabel predicted trees below this height before scoring.
    pub postprocess_threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConfigRun {
    pub normalization: NormalizationParams,
    pub trained: TrainedModel,
    /// Prediction for every point of the cloud.
    pub prediction: Prediction,
    pub report: EvalReport,
}

fn labeled_rows(cloud: &PointCloud, tag: SplitTag) -> Result<Vec<usize>> {
    Ok(cloud.split_ids(tag)?.into_iter().filter(|&i| cloud.label[i].is_labeled()).collect())
}

/// Fits normalization on the train split and trains on it. Also returns
/// the normalized features of every point.
pub fn fit_model(
    cloud: &PointCloud,
    config: FeatureConfig,
    params: &ExperimentParams,
) -> Result<(NormalizationParams, FeatureMatrix, TrainedModel)> {
    let raw = raw_features(cloud, config, &params.features)?;
    let train_rows = training_rows(cloud)?;
    let normalization = fit_normalization(&raw, &train_rows, config, &params.features)?;
    let x = apply_normalization(&raw, &normalization)?;
    let xt = x.select_rows(&train_rows);
    let yt: Vec<_> = train_rows.iter().map(|&i| cloud.label[i]).collect();
    let val_rows = if params.train.patience.is_some() { labeled_rows(cloud, SplitTag::Val)? } else { Vec::new() };
    let xv = x.select_rows(&val_rows);
    let yv: Vec<_> = val_rows.iter().map(|&i| cloud.label[i]).collect();
    info!("{config}: training on {} points ({} features)", xt.rows, xt.cols);
    let trained = train(&xt, &yt, Some((&xv, &yv)), &params.train)?;
    Ok((normalization, x, trained))
}

/// [`fit_model`], then predicts every point and scores the test split.
pub fn run_config(cloud: &PointCloud, config: FeatureConfig, params: &ExperimentParams) -> Result<ConfigRun> {
    let (normalization, x, trained) = fit_model(cloud, config, params)?;
    let mut prediction = predict(&x, &trained.model)?;
    if let Some(t) = params.postprocess_threshold {
        prediction = height_threshold_postprocess(&prediction, cloud, t)?;
    }
    let test_rows = labeled_rows(cloud, SplitTag::Test)?;
    let mut report = evaluate(&prediction, cloud, Some(&test_rows), &params.eval)?;
    report.config = Some(config.name().into());
    report.context.insert("scored".into(), "test split".into());
    report.context.insert("seed".into(), params.train.seed.to_string());
    Ok(ConfigRun { normalization, trained, prediction, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub reports: Vec<EvalReport>,
    /// Metric name to the configuration that scored best on it.
    pub best: BTreeMap<String, String>,
}

impl AblationResult {
    pub fn from_reports(reports: Vec<EvalReport>) -> Self {
        let mut best = BTreeMap::new();
        let pick = |key: fn(&EvalReport) -> Option<f64>, higher: bool| {
            reports
                .iter()
                .filter_map(|r| key(r).map(|v| (v, r.config.clone().unwrap_or_default())))
                .reduce(|a, b| if (higher && b.0 > a.0) || (!higher && b.0 < a.0) { b } else { a })
                .map(|(_, c)| c)
        };
        let metrics: [(&str, fn(&EvalReport) -> Option<f64>, bool); 6] = [
            ("iou_nontree", |r| Some(r.iou_nontree), true),
            ("iou_tree", |r| Some(r.iou_tree), true),
            ("miou", |r| Some(r.miou), true),
            ("macc", |r| Some(r.macc), true),
            ("oa", |r| Some(r.oa), true),
            ("error_rate_above", |r| r.error_rate_above, false),
        ];
        for (name, key, higher) in metrics {
            if let Some(c) = pick(key, higher) {
                best.insert(name.to_string(), c);
            }
        }
        AblationResult { reports, best }
    }

    pub fn report(&self, config: FeatureConfig) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.config.as_deref() == Some(config.name()))
    }
}

/// Runs every configuration with identical data and seed. `on_report` sees
/// each report as it completes; on failure the completed part is returned
/// alongside the error.
pub fn run_ablation(
    cloud: &PointCloud,
    configs: &[FeatureConfig],
    params: &ExperimentParams,
    mut on_report: impl FnMut(&EvalReport),
) -> std::result::Result<AblationResult, (AblationResult, Error)> {
    let mut reports = Vec::new();
    for &c in configs {
        match run_config(cloud, c, params) {
            Ok(run) => {
                on_report(&run.report);
                reports.push(run.report);
            }
            Err(e) => return Err((AblationResult::from_reports(reports), e)),
        }
    }
    Ok(AblationResult::from_reports(reports))
}
