//! Tile-based train / val / test partitioning.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, SplitTag};
use crate::error::{Error, Result};

/// Default target ratios (train, val, test).
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.6853, 0.1519, 0.1628];

/// Square XY tile key on the global grid `floor(x / size)`.
pub fn tile_key(x: f64, y: f64, tile_size: f64) -> (i64, i64) {
    ((x / tile_size).floor() as i64, (y / tile_size).floor() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileAssignment {
    pub ix: i64,
    pub iy: i64,
    pub points: usize,
    pub split: SplitTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSplit {
    pub tile_size: f64,
    pub seed: u64,
    pub target: [f64; 3],
    pub achieved: [f64; 3],
    pub tiles: Vec<TileAssignment>,
    #[serde(skip)]
    pub assignment: Vec<SplitTag>,
    pub warning: Option<String>,
}

impl PlotSplit {
    pub fn apply(&self, cloud: &mut PointCloud) -> Result<()> {
        if self.assignment.len() != cloud.len() {
            return Err(Error::LengthMismatch("split assignment does not match the cloud".into()));
        }
        cloud.split = Some(self.assignment.clone());
        Ok(())
    }
}

/// Groups points into square tiles and hands tiles out greedily, largest
/// first, to whichever split is furthest below its target point count.
/// Tile order among equal counts is fixed by `seed`.
pub fn split_plots(cloud: &PointCloud, target: [f64; 3], tile_size: f64, seed: u64) -> Result<PlotSplit> {
    if target.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) || (target.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("split ratios {target:?} must be non-negative and sum to 1")));
    }
    if !(tile_size > 0.0) {
        return Err(Error::InvalidParameter("tile_size must be > 0".into()));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty cloud".into()));
    }
    let mut tiles: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for i in 0..cloud.len() {
        tiles.entry(tile_key(cloud.x[i], cloud.y[i], tile_size)).or_default().push(i);
    }
    let mut order: Vec<((i64, i64), usize)> = tiles.iter().map(|(k, v)| (*k, v.len())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by(|a, b| b.1.cmp(&a.1));

    let n = cloud.len() as f64;
    let mut current = [0usize; 3];
    let mut assigned: BTreeMap<(i64, i64), SplitTag> = BTreeMap::new();
    let warning = if order.len() == 1 {
        let msg = "cloud fits inside a single tile; all points go to one split".to_string();
        warn!("{msg}");
        Some(msg)
    } else {
        None
    };
    for (key, count) in &order {
        let best = (0..3)
            .filter(|&s| target[s] > 0.0)
            .max_by(|&a, &b| {
                let da = target[a] * n - current[a] as f64;
                let db = target[b] * n - current[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        current[best] += count;
        assigned.insert(*key, SplitTag::from_code(best as u8).unwrap());
    }

    let mut assignment = vec![SplitTag::Train; cloud.len()];
    let mut tile_list = Vec::with_capacity(tiles.len());
    for (key, ids) in &tiles {
        let tag = assigned[key];
        for &i in ids {
            assignment[i] = tag;
        }
        tile_list.push(TileAssignment { ix: key.0, iy: key.1, points: ids.len(), split: tag });
    }
    let achieved = [current[0] as f64 / n, current[1] as f64 / n, current[2] as f64 / n];
    Ok(PlotSplit { tile_size, seed, target, achieved, tiles: tile_list, assignment, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{Channel, Label};

    fn grid_cloud(tiles_per_side: usize, per_tile: usize, tile: f64) -> PointCloud {
        let mut c = PointCloud::new();
        let side = (per_tile as f64).sqrt().ceil() as usize;
        for tx in 0..tiles_per_side {
            for ty in 0..tiles_per_side {
                for k in 0..per_tile {
                    let fx = (k % side) as f64 / side as f64;
                    let fy = (k / side) as f64 / side as f64;
                    c.push((tx as f64 + fx) * tile, (ty as f64 + fy) * tile, 0.0, Channel::Green532, 0.0, Label::NonTree);
                }
            }
        }
        c
    }

    #[test]
    fn hundred_uniform_tiles_hit_target_ratios() {
        let c = grid_cloud(10, 25, 10.0);
        let s = split_plots(&c, [0.6853, 0.1628, 0.1519], 10.0, 7).unwrap();
        assert_eq!(s.tiles.len(), 100);
        for k in 0..3 {
            assert!((s.achieved[k] - s.target[k]).abs() <= 0.05, "{:?}", s.achieved);
        }
        assert!((s.achieved.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_train() {
        let c = grid_cloud(4, 4, 5.0);
        let s = split_plots(&c, [1.0, 0.0, 0.0], 5.0, 1).unwrap();
        assert!(s.assignment.iter().all(|&t| t == SplitTag::Train));
        assert_eq!(s.achieved, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn deterministic_under_seed() {
        let c = grid_cloud(8, 9, 5.0);
        let a = split_plots(&c, [0.6, 0.2, 0.2], 5.0, 99).unwrap();
        let b = split_plots(&c, [0.6, 0.2, 0.2], 5.0, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn single_tile_warns() {
        let c = grid_cloud(1, 4, 100.0);
        let s = split_plots(&c, [0.7, 0.15, 0.15], 1000.0, 0).unwrap();
        assert!(s.warning.is_some());
        assert_eq!(s.achieved, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn bad_ratios() {
        let c = grid_cloud(2, 1, 1.0);
        assert!(split_plots(&c, [0.5, 0.2, 0.2], 1.0, 0).is_err());
        assert!(split_plots(&c, [0.6, 0.2, 0.2], 0.0, 0).is_err());
    }
}
