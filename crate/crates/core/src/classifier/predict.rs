use serde::{Deserialize, Serialize};

use super::mlp::{softmax2, Mlp};
use crate::cloud::{Label, PointCloud};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::io::labels::parse_labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Model,
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `[p_nontree, p_tree]` per point.
    pub probabilities: Vec<[f64; 2]>,
    pub labels: Vec<Label>,
    pub source: PredictionSource,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hard labels with one-hot probabilities.
    pub fn from_labels(labels: Vec<Label>, source: PredictionSource) -> Result<Self> {
        let probabilities = labels
            .iter()
            .enumerate()
            .map(|(i, l)| match l {
                Label::NonTree => Ok([1.0, 0.0]),
                Label::Tree => Ok([0.0, 1.0]),
                Label::Unlabeled => Err(Error::InvalidLabel { line: i + 1, token: "255".into() }),
            })
            .collect::<Result<_>>()?;
        Ok(Prediction { probabilities, labels, source })
    }
}

/// Argmax label; equal probabilities resolve to `NonTree`.
pub fn decide(p: [f64; 2]) -> Label {
    if p[1] > p[0] {
        Label::Tree
    } else {
        Label::NonTree
    }
}

pub fn predict(features: &FeatureMatrix, model: &Mlp) -> Result<Prediction> {
    if features.cols != model.d_in() {
        return Err(Error::DimensionMismatch { expected: model.d_in(), found: features.cols });
    }
    let probabilities: Vec<[f64; 2]> = model.logits(&features.data, features.rows)?.into_iter().map(softmax2).collect();
    let labels = probabilities.iter().map(|&p| decide(p)).collect();
    Ok(Prediction { probabilities, labels, source: PredictionSource::Model })
}

/// Reads an external one-label-per-line prediction for `cloud`.
pub fn import_predictions(text: &str, cloud: &PointCloud) -> Result<Prediction> {
    Prediction::from_labels(parse_labels(text, cloud.len())?, PredictionSource::Imported)
}

/// Relabels predicted trees lower than `t` above the terrain as non-tree.
pub fn height_threshold_postprocess(pred: &Prediction, cloud: &PointCloud, t: f64) -> Result<Prediction> {
    let h = cloud.h_norm.as_deref().ok_or_else(|| Error::MissingColumn("h_norm".into()))?;
    if h.len() != pred.len() {
        return Err(Error::LengthMismatch(format!("{} predictions for {} points", pred.len(), h.len())));
    }
    let mut out = pred.clone();
    for i in 0..out.len() {
        if out.labels[i] == Label::Tree && (h[i] as f64) < t {
            out.labels[i] = Label::NonTree;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Channel;

    #[test]
    fn zero_model_ties_to_nontree() {
        let m = Mlp::zeros(&[3, 4, 2]).unwrap();
        let f = FeatureMatrix { names: vec![], rows: 2, cols: 3, data: vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3] };
        let p = predict(&f, &m).unwrap();
        assert_eq!(p.probabilities[0], [0.5, 0.5]);
        assert_eq!(p.labels, vec![Label::NonTree; 2]);
        assert_eq!(p.probabilities[0], p.probabilities[1]);
        let bad = FeatureMatrix { names: vec![], rows: 1, cols: 2, data: vec![0.0; 2] };
        assert!(predict(&bad, &m).is_err());
    }

    fn cloud(h: &[f32]) -> PointCloud {
        let mut c = PointCloud::new();
        for _ in h {
            c.push(0.0, 0.0, 0.0, Channel::Green532, 0.0, Label::NonTree);
        }
        c.h_norm = Some(h.to_vec());
        c
    }

    #[test]
    fn threshold() {
        let c = cloud(&[0.5, 10.0, 1.0]);
        let p = Prediction::from_labels(vec![Label::Tree, Label::Tree, Label::NonTree], PredictionSource::Model).unwrap();
        let q = height_threshold_postprocess(&p, &c, 2.0).unwrap();
        assert_eq!(q.labels, vec![Label::NonTree, Label::Tree, Label::NonTree]);
        assert_eq!(height_threshold_postprocess(&p, &c, 0.0).unwrap(), p);
        let mut no_h = c.clone();
        no_h.h_norm = None;
        assert!(height_threshold_postprocess(&p, &no_h, 2.0).is_err());
    }

    #[test]
    fn import() {
        let c = cloud(&[1.0, 2.0, 3.0]);
        let p = import_predictions("1\n1\n1\n", &c).unwrap();
        assert_eq!(p.labels, vec![Label::Tree; 3]);
        assert_eq!(p.source, PredictionSource::Imported);
        assert!(import_predictions("1\n1\n", &c).is_err());
        assert!(import_predictions("1\n2\n1\n", &c).is_err());
    }
}
