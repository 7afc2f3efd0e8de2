//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mstree_core::{Channel, Label, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Random cloud; coordinates are quantized on half the trials so that
/// distance ties and coincident points are common.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let quantize = rng.random_bool(0.5);
    let extent = rng.random_range(1.0..50.0);
    let mut c = PointCloud::with_capacity(n);
    for _ in 0..n {
        let mut p = [0.0f64; 3];
        for v in &mut p {
            *v = rng.random_range(0.0..extent);
            if quantize {
                *v = (*v * 2.0).round() / 2.0;
            }
        }
        let ch = if rng.random_bool(0.5) { Channel::Green532 } else { Channel::Nir1064 };
        let label = if rng.random_bool(0.3) { Label::Tree } else { Label::NonTree };
        c.push(p[0], p[1], p[2], ch, rng.random_range(-30.0..0.0), label);
    }
    c
}

pub fn seeded(trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xA11CE ^ trial.wrapping_mul(0x9E37_79B9))
}

fn candidates(cloud: &PointCloud, q: [f64; 3], filter: Option<Channel>) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = (0..cloud.len())
        .filter(|&i| filter.is_none_or(|c| cloud.channel[i] == c))
        .map(|i| (d2(cloud.position(i), q), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

/// (id, distance) of the `k` nearest points by scanning every point.
pub fn knn(cloud: &PointCloud, q: [f64; 3], k: usize, filter: Option<Channel>) -> Vec<(usize, f64)> {
    candidates(cloud, q, filter).into_iter().take(k).map(|(d, i)| (i, d.sqrt())).collect()
}

pub fn radius(cloud: &PointCloud, q: [f64; 3], r: f64, k_max: Option<usize>, filter: Option<Channel>) -> Vec<(usize, f64)> {
    let r2 = r * r;
    candidates(cloud, q, filter)
        .into_iter()
        .take_while(|&(d, _)| d <= r2)
        .take(k_max.unwrap_or(usize::MAX))
        .map(|(d, i)| (i, d.sqrt()))
        .collect()
}

/// Ids removed by statistical outlier removal.
pub fn sor_removed(cloud: &PointCloud, k: usize, n_sigma: f64) -> Vec<usize> {
    let n = cloud.len();
    let mean_d: Vec<f64> = (0..n)
        .map(|i| {
            let q = cloud.position(i);
            let s: f64 = candidates(cloud, q, None).into_iter().filter(|&(_, j)| j != i).take(k).map(|(d, _)| d.sqrt()).sum();
            s / k as f64
        })
        .collect();
    let mean = mean_d.iter().sum::<f64>() / n as f64;
    let var = mean_d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let thr = mean + n_sigma * var.sqrt();
    (0..n).filter(|&i| mean_d[i] > thr).collect()
}

/// (tp, fp, fn, tn) with tree as the positive class.
pub fn confusion(pred: &[Label], truth: &[Label]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        match (p, t) {
            (Label::Tree, Label::Tree) => c.0 += 1,
            (Label::Tree, Label::NonTree) => c.1 += 1,
            (Label::NonTree, Label::Tree) => c.2 += 1,
            (Label::NonTree, Label::NonTree) => c.3 += 1,
            _ => panic!("unlabeled point in oracle input"),
        }
    }
    c
}

/// Kept ids (ascending) and their voted labels.
pub fn voxel(cloud: &PointCloud, grid: f64) -> Vec<(usize, Label)> {
    let mut cells: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for i in 0..cloud.len() {
        let p = cloud.position(i);
        let key = ((p[0] / grid).floor() as i64, (p[1] / grid).floor() as i64, (p[2] / grid).floor() as i64);
        cells.entry(key).or_default().push(i);
    }
    let mut out: Vec<(usize, Label)> = cells
        .values()
        .map(|ids| {
            let mut c = [0.0; 3];
            for &i in ids {
                let p = cloud.position(i);
                for a in 0..3 {
                    c[a] += p[a];
                }
            }
            for v in &mut c {
                *v /= ids.len() as f64;
            }
            let mut best = ids[0];
            for &i in &ids[1..] {
                if d2(cloud.position(i), c) < d2(cloud.position(best), c) {
                    best = i;
                }
            }
            let trees = ids.iter().filter(|&&i| cloud.label[i] == Label::Tree).count();
            let label = if 2 * trees >= ids.len() { Label::Tree } else { Label::NonTree };
            (best, label)
        })
        .collect();
    out.sort_by_key(|e| e.0);
    out
}

/// Weighted-mean two-class cross-entropy of a ReLU network, evaluated
/// directly from the flat parameter layout (per layer: `out x in` weights
/// row-major, then biases).
pub fn mlp_loss(sizes: &[usize], params: &[f64], x: &[f64], y: &[u8], w: [f64; 2]) -> f64 {
    let d = sizes[0];
    let (mut num, mut den) = (0.0, 0.0);
    for (r, &label) in y.iter().enumerate() {
        let mut a: Vec<f64> = x[r * d..(r + 1) * d].to_vec();
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let bias = off + n_in * n_out;
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                let mut s = params[bias + o];
                for i in 0..n_in {
                    s += params[off + o * n_in + i] * a[i];
                }
                z[o] = if l + 2 < sizes.len() { s.max(0.0) } else { s };
            }
            off = bias + n_out;
            a = z;
        }
        let m = a[0].max(a[1]);
        let lse = m + ((a[0] - m).exp() + (a[1] - m).exp()).ln();
        let wc = w[label as usize];
        num += wc * (lse - a[label as usize]);
        den += wc;
    }
    num / den
}
