//! Statistical outlier removal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::build_index;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SorParams {
    /// Neighbors per point (the point itself excluded).
    pub k: usize,
    /// Standard deviations above the mean neighbor distance that mark an outlier.
    pub n_sigma: f64,
}

impl Default for SorParams {
    fn default() -> Self {
        Self { k: 6, n_sigma: 1.0 }
    }
}

impl SorParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || !(self.n_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("SOR needs k >= 1 and n_sigma > 0, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SorOutcome {
    pub kept: PointCloud,
    /// Ids (into the input cloud) of removed points, ascending.
    pub removed: Vec<usize>,
    pub mean_distances: Vec<f64>,
    pub threshold: f64,
}

/// Mean distance from every point to its `k` nearest other points.
pub fn mean_knn_distances(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let index = build_index(cloud, None)?;
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let hits = index.knn(cloud.position(i), k + 1);
            let sum: f64 = hits.iter().filter(|h| h.id != i).take(k).map(|h| h.dist).sum();
            sum / k as f64
        })
        .collect())
}

/// Removes points whose mean k-NN distance exceeds `mean + n_sigma * std`
/// of the global distribution (population standard deviation).
pub fn sor_filter(cloud: &PointCloud, params: &SorParams) -> Result<SorOutcome> {
    params.validate()?;
    if cloud.len() <= params.k {
        return Err(Error::EmptyInput(format!(
            "SOR with k = {} needs more than {} points, cloud has {}",
            params.k,
            params.k,
            cloud.len()
        )));
    }
    let d = mean_knn_distances(cloud, params.k)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let threshold = mean + params.n_sigma * var.sqrt();
    let (keep, removed): (Vec<usize>, Vec<usize>) = (0..cloud.len()).partition(|&i| d[i] <= threshold);
    Ok(SorOutcome { kept: cloud.select(&keep), removed, mean_distances: d, threshold })
}
