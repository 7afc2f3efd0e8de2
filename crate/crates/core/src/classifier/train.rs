//! Class weighting, the AdamW optimizer and the training loop.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::cloud::Label;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Training points sampled (without replacement) per epoch; 0 uses all.
    /// The default bounds the cost of an epoch on large clouds.
    pub points_per_epoch: usize,
    /// Stops after this many epochs without validation-loss improvement
    /// and restores the best weights. Needs validation data.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 300,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 8192,
            points_per_epoch: 65_536,
            patience: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.weight_decay >= 0.0)
            || self.hidden.iter().any(|&h| h == 0)
            || self.patience == Some(0)
        {
            return Err(Error::InvalidParameter(format!("invalid training config {self:?}")));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, d_in: usize) -> Vec<usize> {
        let mut s = vec![d_in];
        s.extend(&self.hidden);
        s.push(2);
        s
    }
}

/// Inverse-frequency weights `N / (2 N_c)`, rescaled to mean 1; index 0 is
/// non-tree, 1 is tree. Unlabeled entries are ignored.
pub fn compute_class_weights(labels: &[Label]) -> Result<[f64; 2]> {
    let tree = labels.iter().filter(|&&l| l == Label::Tree).count() as f64;
    let non = labels.iter().filter(|&&l| l == Label::NonTree).count() as f64;
    if tree == 0.0 || non == 0.0 {
        return Err(Error::Degenerate(format!("training labels need both classes (tree {tree}, non-tree {non})")));
    }
    let n = tree + non;
    let w = [n / (2.0 * non), n / (2.0 * tree)];
    let mean = (w[0] + w[1]) / 2.0;
    Ok([w[0] / mean, w[1] / mean])
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        AdamW { lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One step with decoupled weight decay.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            params[i] -= self.lr * self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Mlp,
    pub class_weights: [f64; 2],
    pub config: TrainConfig,
    pub loss_curve: Vec<EpochLoss>,
}

pub fn loss_curve_csv(curve: &[EpochLoss]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for e in curve {
        let val = e.val_loss.map(|v| format!("{v:.9}")).unwrap_or_default();
        s.push_str(&format!("{},{:.9},{}\n", e.epoch, e.train_loss, val));
    }
    s
}

fn label_codes(labels: &[Label]) -> Result<Vec<u8>> {
    labels
        .iter()
        .map(|l| match l {
            Label::NonTree => Ok(0),
            Label::Tree => Ok(1),
            Label::Unlabeled => Err(Error::Degenerate("training rows must be labeled".into())),
        })
        .collect()
}

/// Trains from scratch. The returned weights are rounded to `f32`, the
/// checkpoint precision, so in-memory and reloaded models predict alike.
pub fn train(
    features: &FeatureMatrix,
    labels: &[Label],
    validation: Option<(&FeatureMatrix, &[Label])>,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if features.rows != labels.len() {
        return Err(Error::LengthMismatch(format!("{} feature rows vs {} labels", features.rows, labels.len())));
    }
    if features.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("training features contain non-finite values".into()));
    }
    let class_weights = compute_class_weights(labels)?;
    let y = label_codes(labels)?;
    let d = features.cols;
    let mut model = Mlp::init(&config.layer_sizes(d), config.seed)?;
    let val = match validation {
        Some((vx, vl)) if vx.rows > 0 => {
            if vx.cols != d || vx.rows != vl.len() {
                return Err(Error::DimensionMismatch { expected: d, found: vx.cols });
            }
            Some((vx, label_codes(vl)?))
        }
        _ => None,
    };

    let mut opt = AdamW::new(model.params.len(), config.learning_rate, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..features.rows).collect();
    let per_epoch = if config.points_per_epoch == 0 { features.rows } else { config.points_per_epoch.min(features.rows) };
    let mut curve = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Mlp)> = None;
    let mut stale = 0;
    let mut xb = Vec::with_capacity(config.batch_size * d);
    let mut yb = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut rows_seen) = (0.0, 0usize);
        for (bi, batch) in order[..per_epoch].chunks(config.batch_size).enumerate() {
            xb.clear();
            yb.clear();
            for &i in batch {
                xb.extend_from_slice(features.row(i));
                yb.push(y[i]);
            }
            let (loss, grad) = model.loss_and_grad(&xb, &yb, class_weights)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "loss became {loss} at epoch {epoch}, batch {bi} (learning rate {}); try a lower learning rate",
                    config.learning_rate
                )));
            }
            opt.step(&mut model.params, &grad);
            loss_sum += loss * batch.len() as f64;
            rows_seen += batch.len();
        }
        let val_loss = match &val {
            Some((vx, vy)) => {
                let mut probe = model.clone();
                probe.round_to_f32();
                Some(probe.loss(&vx.data, vy, class_weights)?)
            }
            None => None,
        };
        let train_loss = loss_sum / rows_seen as f64;
        debug!("epoch {epoch}: train loss {train_loss:.6} val loss {val_loss:?}");
        curve.push(EpochLoss { epoch, train_loss, val_loss });
        if let (Some(patience), Some(vl)) = (config.patience, val_loss) {
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    info!("early stop after epoch {epoch}");
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    model.round_to_f32();
    if !model.is_finite() {
        return Err(Error::Numeric("trained weights are not finite".into()));
    }
    Ok(TrainedModel { model, class_weights, config: config.clone(), loss_curve: curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::predict::predict;
    use rand::Rng;

    fn separable(n: usize) -> (FeatureMatrix, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            let tree = a + b > 1.0;
            // keep a margin around the boundary
            let shift = if tree { 0.1 } else { -0.1 };
            data.extend_from_slice(&[(a + shift).clamp(0.0, 1.0), (b + shift).clamp(0.0, 1.0)]);
            labels.push(if tree { Label::Tree } else { Label::NonTree });
        }
        (FeatureMatrix { names: vec!["a".into(), "b".into()], rows: n, cols: 2, data }, labels)
    }

    fn quick() -> TrainConfig {
        TrainConfig { epochs: 50, learning_rate: 0.05, batch_size: 32, seed: 9, ..Default::default() }
    }

    #[test]
    fn class_weights() {
        let w = compute_class_weights(&[Label::Tree, Label::NonTree]).unwrap();
        assert_eq!(w, [1.0, 1.0]);
        let mut l = vec![Label::NonTree; 82];
        l.extend(vec![Label::Tree; 18]);
        let w = compute_class_weights(&l).unwrap();
        assert!((w[0] - 0.36).abs() < 1e-3 && (w[1] - 1.64).abs() < 1e-3, "{w:?}");
        assert!(((w[1] / w[0]) - 82.0 / 18.0).abs() < 1e-9);
        let mut l = vec![Label::NonTree; 99];
        l.push(Label::Tree);
        let w = compute_class_weights(&l).unwrap();
        assert!((w[1] / w[0] - 99.0).abs() < 1e-9);
        assert!(compute_class_weights(&[Label::Tree; 4]).is_err());
    }

    #[test]
    fn separable_reaches_full_accuracy() {
        let (x, y) = separable(200);
        let t = train(&x, &y, None, &quick()).unwrap();
        let p = predict(&x, &t.model).unwrap();
        assert_eq!(p.labels, y);
        assert!(t.loss_curve.last().unwrap().train_loss <= t.loss_curve[0].train_loss);
    }

    #[test]
    fn deterministic() {
        let (x, y) = separable(300);
        let a = train(&x, &y, None, &quick()).unwrap();
        let b = train(&x, &y, None, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let (x, y) = separable(20);
        let cfg = TrainConfig { epochs: 0, ..quick() };
        let t = train(&x, &y, None, &cfg).unwrap();
        let mut init = Mlp::init(&cfg.layer_sizes(2), cfg.seed).unwrap();
        init.round_to_f32();
        assert_eq!(t.model, init);
        assert!(t.loss_curve.is_empty());
    }

    #[test]
    fn flipped_labels_flip_predictions() {
        let (x, y) = separable(200);
        let flipped: Vec<Label> = y.iter().map(|l| l.flipped()).collect();
        let t = train(&x, &flipped, None, &quick()).unwrap();
        let p = predict(&x, &t.model).unwrap();
        assert_eq!(p.labels, flipped);
    }

    #[test]
    fn huge_learning_rate_is_numeric_error() {
        let (mut x, y) = separable(64);
        for v in &mut x.data {
            *v *= 1e300;
        }
        let cfg = TrainConfig { learning_rate: 1e300, ..quick() };
        assert!(matches!(train(&x, &y, None, &cfg), Err(Error::Numeric(_))));
    }

    #[test]
    fn early_stopping_restores_best() {
        let (x, y) = separable(200);
        let cfg = TrainConfig { patience: Some(3), epochs: 400, ..quick() };
        let t = train(&x, &y, Some((&x, &y)), &cfg).unwrap();
        assert!(t.loss_curve.len() <= 400);
        assert!(t.loss_curve.iter().all(|e| e.val_loss.is_some()));
    }

    #[test]
    fn adamw_decay_only() {
        let mut opt = AdamW::new(1, 0.1, 0.5);
        let mut p = [2.0];
        opt.step(&mut p, &[0.0]);
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn loss_csv_header() {
        let csv = loss_curve_csv(&[EpochLoss { epoch: 0, train_loss: 0.5, val_loss: None }]);
        assert!(csv.starts_with("epoch,train_loss,val_loss\n0,0.5"));
    }
}
