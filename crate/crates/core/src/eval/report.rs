//! Evaluation reports and their CSV / JSON / LAS exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, error_rate_above, metrics, ConfusionMatrix, ErrorRateMode};
use crate::classifier::Prediction;
use crate::cloud::{Label, PointCloud};
use crate::error::{Error, Result};
use crate::io::{write_las, LasWriteOptions};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub threshold: f64,
    pub error_rate_mode: ErrorRateMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { threshold: 2.0, error_rate_mode: ErrorRateMode::AllPoints }
    }
}

/// Metrics are percentages kept at full precision; exports print 2 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub config: Option<String>,
    pub evaluated_points: u64,
    pub counts: ConfusionMatrix,
    pub iou_nontree: f64,
    pub iou_tree: f64,
    pub miou: f64,
    pub macc: f64,
    pub oa: f64,
    pub threshold: f64,
    pub error_rate_mode: ErrorRateMode,
    /// `None` when no point lies above the threshold.
    pub error_rate_above: Option<f64>,
    /// Free-form provenance: scored cloud, seeds, parameter hashes.
    #[serde(default)]
    pub context: BTreeMap<String, String>,
}

/// Scores `pred` against the cloud's labels on `rows` (all rows when
/// `None`); rows without a reference label are skipped.
pub fn evaluate(pred: &Prediction, cloud: &PointCloud, rows: Option<&[usize]>, opts: &EvalOptions) -> Result<EvalReport> {
    if pred.len() != cloud.len() {
        return Err(Error::LengthMismatch(format!("{} predictions for {} points", pred.len(), cloud.len())));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..cloud.len()).collect();
            &all
        }
    };
    let rows: Vec<usize> = rows.iter().copied().filter(|&i| cloud.label[i].is_labeled()).collect();
    if rows.is_empty() {
        return Err(Error::EmptyInput("no labeled points to evaluate".into()));
    }
    let p: Vec<Label> = rows.iter().map(|&i| pred.labels[i]).collect();
    let t: Vec<Label> = rows.iter().map(|&i| cloud.label[i]).collect();
    let counts = confusion(&p, &t)?;
    let m = metrics(&counts)?;
    let error_rate = match &cloud.h_norm {
        Some(h) => {
            let h: Vec<f32> = rows.iter().map(|&i| h[i]).collect();
            error_rate_above(&p, &t, &h, opts.threshold, opts.error_rate_mode)?
        }
        None => {
            warn!("cloud has no h_norm column; above-threshold error rate not computed");
            None
        }
    };
    if error_rate.is_none() {
        warn!("no evaluated points above {} m; error rate is N/A", opts.threshold);
    }
    Ok(EvalReport {
        schema: REPORT_SCHEMA_VERSION,
        config: None,
        evaluated_points: counts.total(),
        counts,
        iou_nontree: m.iou_nontree,
        iou_tree: m.iou_tree,
        miou: m.miou,
        macc: m.macc,
        oa: m.oa,
        threshold: opts.threshold,
        error_rate_mode: opts.error_rate_mode,
        error_rate_above: error_rate,
        context: BTreeMap::new(),
    })
}

pub const REPORT_CSV_HEADER: &str =
    "config,iou_nontree,iou_tree,miou,macc,oa,error_rate_above,threshold,error_rate_mode,tp,fp,fn,tn,evaluated_points";

fn csv_row(r: &EvalReport) -> String {
    let er = r.error_rate_above.map(|v| format!("{v:.2}")).unwrap_or_else(|| "NA".into());
    format!(
        "{},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{},{},{},{},{},{}",
        r.config.as_deref().unwrap_or(""),
        r.iou_nontree,
        r.iou_tree,
        r.miou,
        r.macc,
        r.oa,
        er,
        r.threshold,
        r.error_rate_mode.name(),
        r.counts.tp,
        r.counts.fp,
        r.counts.fn_,
        r.counts.tn,
        r.evaluated_points
    )
}

pub fn reports_to_csv<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        s.push_str(&csv_row(r));
        s.push('\n');
    }
    s
}

/// Plain-text table with one row per report.
pub fn reports_to_table<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}", "config", "IoU_nt", "IoU_tree", "mIoU", "mAcc", "OA", "err>t");
    for r in reports {
        let er = r.error_rate_above.map(|v| format!("{v:.2}")).unwrap_or_else(|| "N/A".into());
        let _ = writeln!(
            s,
            "{:<22} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>10}",
            r.config.as_deref().unwrap_or("-"),
            r.iou_nontree,
            r.iou_tree,
            r.miou,
            r.macc,
            r.oa,
            er
        );
    }
    s
}

/// Per-point highlight: 0 correct non-tree, 1 misclassified, 2 correct tree.
/// Unlabeled reference points get 0.
pub fn error_flags(pred: &[Label], truth: &[Label]) -> Vec<u8> {
    pred.iter()
        .zip(truth)
        .map(|(&p, &t)| match (p, t) {
            (_, Label::Unlabeled) => 0,
            (p, t) if p != t => 1,
            (Label::Tree, _) => 2,
            _ => 0,
        })
        .collect()
}

/// LAS copy of the cloud with predicted classes and an `error_flag` attribute.
pub fn export_error_las(cloud: &PointCloud, pred: &Prediction, path: &Path) -> Result<()> {
    if pred.len() != cloud.len() {
        return Err(Error::LengthMismatch(format!("{} predictions for {} points", pred.len(), cloud.len())));
    }
    let opts = LasWriteOptions {
        classification: Some(pred.labels.iter().map(|l| l.code()).collect()),
        extra_u8: vec![("error_flag".into(), error_flags(&pred.labels, &cloud.label))],
    };
    write_las(cloud, path, &opts)
}
