//! Confusion counts (tree is the positive class) and derived percentages.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    pub fn add(self, o: Self) -> Self {
        ConfusionMatrix { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }

    fn tally(pred: Label, truth: Label) -> Self {
        let mut c = ConfusionMatrix::default();
        match (pred, truth) {
            (Label::Tree, Label::Tree) => c.tp = 1,
            (Label::Tree, _) => c.fp = 1,
            (_, Label::Tree) => c.fn_ = 1,
            _ => c.tn = 1,
        }
        c
    }
}

fn check_binary(labels: &[Label]) -> Result<()> {
    match labels.iter().position(|l| !l.is_labeled()) {
        Some(i) => Err(Error::InvalidLabel { line: i + 1, token: Label::Unlabeled.code().to_string() }),
        None => Ok(()),
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(format!("{} predictions vs {} reference labels", pred.len(), truth.len())));
    }
    check_binary(pred)?;
    check_binary(truth)?;
    Ok(pred
        .par_iter()
        .zip(truth.par_iter())
        .fold(ConfusionMatrix::default, |acc, (&p, &t)| acc.add(ConfusionMatrix::tally(p, t)))
        .reduce(ConfusionMatrix::default, ConfusionMatrix::add))
}

/// Percentages derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub iou_nontree: f64,
    pub iou_tree: f64,
    pub miou: f64,
    pub macc: f64,
    pub oa: f64,
    pub recall_nontree: f64,
    pub recall_tree: f64,
}

fn pct(num: u64, den: u64, what: &str) -> f64 {
    if den == 0 {
        warn!("{what} is undefined (zero denominator); reported as 0");
        return 0.0;
    }
    100.0 * (num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::EmptyInput("confusion matrix is empty".into()));
    }
    let iou_tree = pct(cm.tp, cm.tp + cm.fp + cm.fn_, "IoU_tree");
    let iou_nontree = pct(cm.tn, cm.tn + cm.fn_ + cm.fp, "IoU_nontree");
    let recall_tree = pct(cm.tp, cm.tp + cm.fn_, "tree recall");
    let recall_nontree = pct(cm.tn, cm.tn + cm.fp, "non-tree recall");
    Ok(Metrics {
        iou_nontree,
        iou_tree,
        miou: (iou_nontree + iou_tree) / 2.0,
        macc: (recall_nontree + recall_tree) / 2.0,
        oa: pct(cm.correct(), n, "OA"),
        recall_nontree,
        recall_tree,
    })
}

/// How the above-threshold error rate is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorRateMode {
    /// Misclassified points among all points above the threshold.
    #[default]
    AllPoints,
    /// Misclassified points among points predicted as tree above the threshold.
    PredictedTree,
}

impl ErrorRateMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "all-points" => Some(Self::AllPoints),
            "predicted-tree" | "tree" => Some(Self::PredictedTree),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AllPoints => "all-points",
            Self::PredictedTree => "predicted-tree",
        }
    }
}

/// Error percentage among points with `h_norm > t`; `None` when no point
/// qualifies.
pub fn error_rate_above(pred: &[Label], truth: &[Label], h_norm: &[f32], t: f64, mode: ErrorRateMode) -> Result<Option<f64>> {
    if pred.len() != truth.len() || pred.len() != h_norm.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions, {} labels, {} heights",
            pred.len(),
            truth.len(),
            h_norm.len()
        )));
    }
    let (mut considered, mut correct) = (0u64, 0u64);
    for i in 0..pred.len() {
        if (h_norm[i] as f64) <= t || (mode == ErrorRateMode::PredictedTree && pred[i] != Label::Tree) {
            continue;
        }
        considered += 1;
        correct += (pred[i] == truth[i]) as u64;
    }
    // written as the complement so that with full coverage it equals 100 - OA bit for bit
    Ok((considered > 0).then(|| 100.0 - 100.0 * (correct as f64 / considered as f64)))
}

/// Rounds a percentage to the two decimals used in reports.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}
