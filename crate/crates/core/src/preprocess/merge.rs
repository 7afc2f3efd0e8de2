//! Cross-channel reflectance transfer between the green and NIR point sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Channel, PointCloud};
use crate::error::{Error, Result};
use crate::features::spectral::{db_to_linear, linear_to_db};
use crate::index::{build_index, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeParams {
    /// Spherical search radius, meters.
    pub radius: f64,
    /// Maximum number of other-channel neighbors averaged.
    pub k: usize,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { radius: 1.0, k: 7 }
    }
}

/// Mean of the neighbors' reflectance in the linear domain, returned in dB.
/// `None` when no neighbor lies within the radius.
fn interpolate(index: &SpatialIndex, source: &PointCloud, q: [f64; 3], params: &MergeParams) -> Result<Option<f64>> {
    let hits = index.radius_neighbors(q, params.radius, Some(params.k));
    if hits.is_empty() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for h in &hits {
        sum += db_to_linear(source.reflectance_db[h.id] as f64)?;
    }
    linear_to_db(sum / hits.len() as f64).map(Some)
}

fn transfer(target: &PointCloud, source: &PointCloud, params: &MergeParams) -> Result<Vec<Option<f64>>> {
    let index = build_index(source, None)?;
    (0..target.len()).into_par_iter().map(|i| interpolate(&index, source, target.position(i), params)).collect()
}

/// Merges single-channel clouds into one dual-channel cloud (green rows
/// first, then NIR). Each point keeps its own reflectance in its own channel
/// column and receives the other channel interpolated from up to `k`
/// neighbors within `radius`. Points without any such neighbor get a 0 dB
/// placeholder and `cross_missing = true`.
pub fn merge_channels(green: &PointCloud, nir: &PointCloud, params: &MergeParams) -> Result<PointCloud> {
    if !(params.radius > 0.0) || params.k < 1 {
        return Err(Error::InvalidParameter(format!("merge needs radius > 0 and k >= 1, got {params:?}")));
    }
    if green.is_empty() || nir.is_empty() {
        return Err(Error::EmptyInput("both channel clouds must be non-empty to merge".into()));
    }
    if green.channel.iter().any(|&c| c != Channel::Green532) || nir.channel.iter().any(|&c| c != Channel::Nir1064) {
        return Err(Error::InvalidParameter("merge inputs must each hold a single, matching channel".into()));
    }
    let green_at_nir = transfer(nir, green, params)?;
    let nir_at_green = transfer(green, nir, params)?;

    let mut out = green.concat(nir);
    let n_green = green.len();
    let mut refl_green = Vec::with_capacity(out.len());
    let mut refl_nir = Vec::with_capacity(out.len());
    let mut missing = Vec::with_capacity(out.len());
    for i in 0..n_green {
        refl_green.push(green.reflectance_db[i]);
        refl_nir.push(nir_at_green[i].unwrap_or(0.0) as f32);
        missing.push(nir_at_green[i].is_none());
    }
    for i in 0..nir.len() {
        refl_green.push(green_at_nir[i].unwrap_or(0.0) as f32);
        refl_nir.push(nir.reflectance_db[i]);
        missing.push(green_at_nir[i].is_none());
    }
    out.refl_green_db = Some(refl_green);
    out.refl_nir_db = Some(refl_nir);
    out.cross_missing = Some(missing);
    out.pndvi = None;
    Ok(out)
}

/// Splits a dual-channel cloud by channel and merges it.
pub fn merge_cloud(cloud: &PointCloud, params: &MergeParams) -> Result<PointCloud> {
    merge_channels(&cloud.filter_channel(Channel::Green532), &cloud.filter_channel(Channel::Nir1064), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Label;

    fn one(ch: Channel, pts: &[([f64; 3], f32)]) -> PointCloud {
        let mut c = PointCloud::new();
        for (p, r) in pts {
            c.push(p[0], p[1], p[2], ch, *r, Label::NonTree);
        }
        c
    }

    #[test]
    fn single_neighbor_identity() {
        let g = one(Channel::Green532, &[([0.5, 0.0, 0.0], -10.0)]);
        let n = one(Channel::Nir1064, &[([0.0, 0.0, 0.0], -3.0)]);
        let m = merge_channels(&g, &n, &MergeParams::default()).unwrap();
        assert_eq!(m.len(), 2);
        let i = 1; // the NIR row
        assert!((m.refl_green_db.as_ref().unwrap()[i] + 10.0).abs() < 1e-5);
        assert_eq!(m.refl_nir_db.as_ref().unwrap()[i], -3.0);
    }

    #[test]
    fn constant_field() {
        let g = one(Channel::Green532, &[([0.3, 0.0, 0.0], -10.0), ([-0.3, 0.0, 0.0], -10.0)]);
        let n = one(Channel::Nir1064, &[([0.0, 0.0, 0.0], -3.0)]);
        let m = merge_channels(&g, &n, &MergeParams::default()).unwrap();
        assert!((m.refl_green_db.as_ref().unwrap()[2] + 10.0).abs() < 1e-5);
    }

    #[test]
    fn linear_domain_average() {
        let g = one(Channel::Green532, &[([0.3, 0.0, 0.0], 0.0), ([-0.3, 0.0, 0.0], -10.0)]);
        let n = one(Channel::Nir1064, &[([0.0, 0.0, 0.0], -3.0)]);
        let m = merge_channels(&g, &n, &MergeParams::default()).unwrap();
        let expected = 10.0 * 0.55f64.log10();
        assert!((m.refl_green_db.as_ref().unwrap()[2] as f64 - expected).abs() < 1e-5);
        assert!((expected + 2.596).abs() < 1e-3);
    }

    #[test]
    fn isolated_point_is_flagged_not_dropped() {
        let g = one(Channel::Green532, &[([10.0, 0.0, 0.0], -10.0)]);
        let n = one(Channel::Nir1064, &[([0.0, 0.0, 0.0], -3.0)]);
        let m = merge_channels(&g, &n, &MergeParams::default()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.cross_missing.unwrap(), vec![true, true]);
    }

    #[test]
    fn k_caps_the_neighbor_count() {
        // 1 close neighbor at 0 dB plus 8 farther ones at -20 dB; k = 1 sees only the close one
        let mut pts = vec![([0.1, 0.0, 0.0], 0.0f32)];
        for i in 0..8 {
            pts.push(([0.5 + 0.01 * i as f64, 0.0, 0.0], -20.0));
        }
        let g = one(Channel::Green532, &pts);
        let n = one(Channel::Nir1064, &[([0.0, 0.0, 0.0], -3.0)]);
        let m = merge_channels(&g, &n, &MergeParams { radius: 1.0, k: 1 }).unwrap();
        assert!(m.refl_green_db.as_ref().unwrap()[9].abs() < 1e-6);
    }

    #[test]
    fn empty_channel_is_error() {
        let g = one(Channel::Green532, &[([0.0; 3], 0.0)]);
        assert!(merge_channels(&g, &PointCloud::new(), &MergeParams::default()).is_err());
    }
}
