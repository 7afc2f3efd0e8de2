//! Voxel-grid subsampling with label majority vote.

use std::collections::HashMap;

use crate::cloud::{Label, PointCloud};
use crate::error::{Error, Result};

pub fn voxel_key(p: [f64; 3], grid: f64) -> (i64, i64, i64) {
    ((p[0] / grid).floor() as i64, (p[1] / grid).floor() as i64, (p[2] / grid).floor() as i64)
}

/// Majority label; a tree / non-tree tie resolves to `Tree`. Unlabeled
/// votes are ignored unless nothing else is present.
pub fn majority_label(labels: impl IntoIterator<Item = Label>) -> Label {
    let (mut tree, mut non_tree) = (0usize, 0usize);
    for l in labels {
        match l {
            Label::Tree => tree += 1,
            Label::NonTree => non_tree += 1,
            Label::Unlabeled => {}
        }
    }
    if tree == 0 && non_tree == 0 {
        Label::Unlabeled
    } else if tree >= non_tree {
        Label::Tree
    } else {
        Label::NonTree
    }
}

/// Keeps one point per occupied voxel of the global grid: the point closest
/// to the voxel's centroid (lower id on ties), carrying the voxel's majority
/// label. Output rows keep their input order.
pub fn voxel_subsample(cloud: &PointCloud, grid: f64) -> Result<PointCloud> {
    if !(grid > 0.0) || !grid.is_finite() {
        return Err(Error::InvalidParameter(format!("voxel grid must be > 0, got {grid}")));
    }
    let mut voxels: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..cloud.len() {
        voxels.entry(voxel_key(cloud.position(i), grid)).or_default().push(i);
    }
    let mut kept: Vec<(usize, Label)> = voxels
        .values()
        .map(|ids| {
            let n = ids.len() as f64;
            let mut c = [0.0; 3];
            for &i in ids {
                let p = cloud.position(i);
                (0..3).for_each(|a| c[a] += p[a]);
            }
            c.iter_mut().for_each(|v| *v /= n);
            let best = *ids
                .iter()
                .min_by(|&&a, &&b| {
                    crate::index::dist2(&cloud.position(a), &c)
                        .total_cmp(&crate::index::dist2(&cloud.position(b), &c))
                        .then(a.cmp(&b))
                })
                .unwrap();
            (best, majority_label(ids.iter().map(|&i| cloud.label[i])))
        })
        .collect();
    kept.sort_unstable_by_key(|&(i, _)| i);
    let ids: Vec<usize> = kept.iter().map(|&(i, _)| i).collect();
    let mut out = cloud.select(&ids);
    out.label = kept.iter().map(|&(_, l)| l).collect();
    Ok(out)
}
