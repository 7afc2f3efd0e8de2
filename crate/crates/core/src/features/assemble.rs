//! Builds per-point feature rows (coordinates, spectral columns and local
//! neighborhood aggregates) and scales them with fitted parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{FeatureConfig, SpectralColumn};
use super::normalize::{fit_column, ColumnNorm};
use crate::cloud::{Channel, PointCloud, SplitTag};
use crate::error::{Error, Result};
use crate::index::SpatialIndex;

pub const NORMALIZATION_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeighborhoodParams {
    pub enabled: bool,
    pub k: usize,
    pub radius: f64,
}

impl Default for NeighborhoodParams {
    fn default() -> Self {
        Self { enabled: true, k: 16, radius: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    /// XY are recentered on the center of their square tile of this size.
    pub tile_size: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub neighborhood: NeighborhoodParams,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { tile_size: 25.0, p_low: 1.0, p_high: 99.0, neighborhood: NeighborhoodParams::default() }
    }
}

impl FeatureOptions {
    pub fn validate(&self) -> Result<()> {
        let nb = &self.neighborhood;
        if !(self.tile_size > 0.0) || (nb.enabled && (nb.k == 0 || !(nb.radius > 0.0))) {
            return Err(Error::InvalidParameter(format!("invalid feature options {self:?}")));
        }
        Ok(())
    }
}

/// Everything needed to rebuild the model input for new points: the feature
/// layout and per-column scaling. Stored as a JSON sidecar next to models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub version: u32,
    pub config: FeatureConfig,
    pub options: FeatureOptions,
    pub columns: Vec<ColumnNorm>,
}

impl NormalizationParams {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: NormalizationParams = serde_json::from_str(s)?;
        if p.version != NORMALIZATION_VERSION {
            return Err(Error::VersionMismatch { found: p.version, expected: NORMALIZATION_VERSION });
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

/// Row-major table; in raw tables `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    pub fn select_rows(&self, ids: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(ids.len() * self.cols);
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix { names: self.names.clone(), rows: ids.len(), cols: self.cols, data }
    }
}

pub fn column_names(config: FeatureConfig, opts: &FeatureOptions) -> Vec<String> {
    let mut names: Vec<String> = ["x_centered", "y_centered", "h_norm"].iter().map(|s| s.to_string()).collect();
    names.extend(config.spectral().iter().map(|s| s.name().to_string()));
    if opts.neighborhood.enabled {
        for s in config.spectral() {
            names.push(format!("nb_mean_{}", s.name()));
            names.push(format!("nb_std_{}", s.name()));
        }
        names.push("nb_h_range".into());
        names.push("nb_count".into());
    }
    names
}

fn spectral_values(cloud: &PointCloud, col: SpectralColumn) -> Result<Vec<f64>> {
    let missing = cloud.cross_missing.as_deref();
    let (data, absent_on): (&[f32], Option<Channel>) = match col {
        SpectralColumn::Green => (
            cloud.refl_green_db.as_deref().ok_or_else(|| Error::MissingColumn("refl_green_db".into()))?,
            Some(Channel::Nir1064),
        ),
        SpectralColumn::Nir => (
            cloud.refl_nir_db.as_deref().ok_or_else(|| Error::MissingColumn("refl_nir_db".into()))?,
            Some(Channel::Green532),
        ),
        SpectralColumn::Pndvi => (cloud.pndvi.as_deref().ok_or_else(|| Error::MissingColumn("pndvi".into()))?, None),
    };
    Ok((0..cloud.len())
        .map(|i| {
            let is_missing = missing.is_some_and(|m| m[i]) && absent_on.is_none_or(|c| cloud.channel[i] == c);
            if is_missing {
                f64::NAN
            } else {
                data[i] as f64
            }
        })
        .collect())
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sum2) = (0usize, 0.0, 0.0);
    for v in values.filter(|v| v.is_finite()) {
        n += 1;
        sum += v;
        sum2 += v * v;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    (mean, (sum2 / n as f64 - mean * mean).max(0.0).sqrt())
}

/// Unscaled feature rows for every point of `cloud`.
pub fn raw_features(cloud: &PointCloud, config: FeatureConfig, opts: &FeatureOptions) -> Result<FeatureMatrix> {
    opts.validate()?;
    let h_norm = cloud.h_norm.as_deref().ok_or_else(|| Error::MissingColumn("h_norm".into()))?;
    let spectral: Vec<Vec<f64>> = config.spectral().iter().map(|&s| spectral_values(cloud, s)).collect::<Result<_>>()?;
    let names = column_names(config, opts);
    let cols = names.len();
    let n = cloud.len();
    let nb = opts.neighborhood;
    let index = (nb.enabled && n > 0).then(|| {
        SpatialIndex::from_points((0..n).map(|i| cloud.position(i)).collect(), (0..n).collect())
    });
    let ts = opts.tile_size;
    let mut data = vec![0.0; n * cols];
    data.par_chunks_mut(cols.max(1)).enumerate().for_each(|(i, row)| {
        let center = |v: f64| v - ((v / ts).floor() + 0.5) * ts;
        row[0] = center(cloud.x[i]);
        row[1] = center(cloud.y[i]);
        row[2] = h_norm[i] as f64;
        let mut j = 3;
        for s in &spectral {
            row[j] = s[i];
            j += 1;
        }
        if let Some(index) = &index {
            let hits: Vec<usize> = index
                .knn(cloud.position(i), nb.k)
                .into_iter()
                .filter(|h| h.dist <= nb.radius)
                .map(|h| h.id)
                .collect();
            for s in &spectral {
                let (m, sd) = mean_std(hits.iter().map(|&h| s[h]));
                row[j] = m;
                row[j + 1] = sd;
                j += 2;
            }
            let (lo, hi) = hits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
                let v = h_norm[h] as f64;
                (lo.min(v), hi.max(v))
            });
            row[j] = hi - lo;
            row[j + 1] = hits.len() as f64;
        }
    });
    Ok(FeatureMatrix { names, rows: n, cols, data })
}

/// Fits scaling on `rows` of a raw table.
pub fn fit_normalization(
    raw: &FeatureMatrix,
    rows: &[usize],
    config: FeatureConfig,
    opts: &FeatureOptions,
) -> Result<NormalizationParams> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no training rows to fit normalization on".into()));
    }
    let columns = (0..raw.cols)
        .into_par_iter()
        .map(|j| fit_column(&raw.names[j], rows.iter().map(|&i| raw.data[i * raw.cols + j]), opts.p_low, opts.p_high))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizationParams { version: NORMALIZATION_VERSION, config, options: *opts, columns })
}

pub fn apply_normalization(raw: &FeatureMatrix, params: &NormalizationParams) -> Result<FeatureMatrix> {
    if raw.cols != params.columns.len() {
        return Err(Error::DimensionMismatch { expected: params.columns.len(), found: raw.cols });
    }
    let mut data = raw.data.clone();
    data.par_chunks_mut(raw.cols.max(1)).for_each(|row| {
        for (v, c) in row.iter_mut().zip(&params.columns) {
            *v = c.apply(*v);
        }
    });
    Ok(FeatureMatrix { names: raw.names.clone(), rows: raw.rows, cols: raw.cols, data })
}

/// Rows of the cloud's labeled training split.
pub fn training_rows(cloud: &PointCloud) -> Result<Vec<usize>> {
    let ids = cloud.split_ids(SplitTag::Train)?;
    Ok(ids.into_iter().filter(|&i| cloud.label[i].is_labeled()).collect())
}

/// Raw features of the whole cloud plus scaling fit on its training split.
pub fn fit_features(cloud: &PointCloud, config: FeatureConfig, opts: &FeatureOptions) -> Result<(FeatureMatrix, NormalizationParams)> {
    let raw = raw_features(cloud, config, opts)?;
    let params = fit_normalization(&raw, &training_rows(cloud)?, config, opts)?;
    let m = apply_normalization(&raw, &params)?;
    Ok((m, params))
}

/// Scaled model input for every point of `cloud`.
pub fn assemble_features(cloud: &PointCloud, params: &NormalizationParams) -> Result<FeatureMatrix> {
    let raw = raw_features(cloud, params.config, &params.options)?;
    apply_normalization(&raw, params)
}
