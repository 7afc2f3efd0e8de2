//! Cloth simulation ground filter.
//!
//! The cloud is flipped upside down and a grid of particles is dropped onto
//! it under gravity. Particles stop where they meet the inverted surface;
//! springs to their grid neighbors (`rigidness` relaxation passes per step)
//! keep the cloth from sinking into the pits left by buildings and crowns.
//! Points within `class_threshold` of the settled cloth are ground.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const DAMPING: f64 = 0.01;
const GRAVITY: f64 = 0.2;
const CLOTH_LIFT: f64 = 0.05;
const BUFFER_CELLS: usize = 2;

/// Closed-form displacement factors for `n` relaxation passes of a spring
/// whose other end is fixed (`SINGLE_MOVE`) or also movable (`DOUBLE_MOVE`).
const SINGLE_MOVE: [f64; 16] = [
    0.0, 0.3, 0.51, 0.657, 0.7599, 0.83193, 0.88235, 0.91765, 0.94235, 0.95965, 0.97175, 0.98023, 0.98616, 0.99031,
    0.99322, 0.99525,
];
const DOUBLE_MOVE: [f64; 16] = [
    0.0, 0.3, 0.42, 0.468, 0.4872, 0.4949, 0.498, 0.4992, 0.4997, 0.4999, 0.4999, 0.5, 0.5, 0.5, 0.5, 0.5,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsfParams {
    /// Particle spacing, meters.
    pub cloth_resolution: f64,
    /// 1 (steep terrain) to 3 (flat terrain).
    pub rigidness: u32,
    pub iterations: usize,
    /// Maximum point-to-cloth distance for ground, meters.
    pub class_threshold: f64,
    pub time_step: f64,
}

impl Default for CsfParams {
    fn default() -> Self {
        Self { cloth_resolution: 1.0, rigidness: 2, iterations: 500, class_threshold: 0.5, time_step: 0.65 }
    }
}

impl CsfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cloth_resolution > 0.0) {
            return Err(Error::InvalidParameter("cloth_resolution must be > 0".into()));
        }
        if !(1..=3).contains(&self.rigidness) {
            return Err(Error::InvalidParameter(format!("rigidness must be 1, 2 or 3, got {}", self.rigidness)));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.class_threshold > 0.0) || !(self.time_step > 0.0) {
            return Err(Error::InvalidParameter("class_threshold and time_step must be > 0".into()));
        }
        Ok(())
    }
}

/// Settled cloth in inverted height space (`-z`).
#[derive(Debug, Clone)]
pub struct Cloth {
    pub origin: [f64; 2],
    pub step: f64,
    pub cols: usize,
    pub rows: usize,
    /// Inverted height of each particle, row-major.
    pub heights: Vec<f64>,
    pub iterations_run: usize,
}

impl Cloth {
    /// Bilinear interpolation of the cloth at `(x, y)`, returned as a real
    /// (non-inverted) elevation.
    pub fn elevation_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.step).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.origin[1]) / self.step).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols - 2);
        let r0 = (fy.floor() as usize).min(self.rows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h = |c: usize, r: usize| self.heights[r * self.cols + c];
        let v = h(c0, r0) * (1.0 - tx) * (1.0 - ty)
            + h(c0 + 1, r0) * tx * (1.0 - ty)
            + h(c0, r0 + 1) * (1.0 - tx) * ty
            + h(c0 + 1, r0 + 1) * tx * ty;
        -v
    }
}

struct Particle {
    pos: f64,
    old: f64,
    movable: bool,
}

/// Runs the simulation and returns the settled cloth.
pub fn simulate_cloth(cloud: &PointCloud, params: &CsfParams) -> Result<Cloth> {
    params.validate()?;
    if cloud.len() < 4 {
        return Err(Error::Degenerate(format!("cloth simulation needs >= 4 points, got {}", cloud.len())));
    }
    let (lo, hi) = cloud.bounds().unwrap();
    let step = params.cloth_resolution;
    if hi[0] - lo[0] <= step && hi[1] - lo[1] <= step {
        return Err(Error::Degenerate(format!("XY extent does not exceed the cloth resolution {step} m")));
    }
    let origin = [lo[0] - BUFFER_CELLS as f64 * step, lo[1] - BUFFER_CELLS as f64 * step];
    let cols = ((hi[0] - lo[0]) / step).floor() as usize + 1 + 2 * BUFFER_CELLS;
    let rows = ((hi[1] - lo[1]) / step).floor() as usize + 1 + 2 * BUFFER_CELLS;
    let n = cols * rows;

    // rasterize: each particle takes the inverted height of the XY-nearest point
    // among the points that round to it
    let mut nearest: Vec<Option<(f64, usize)>> = vec![None; n];
    for i in 0..cloud.len() {
        let fc = (cloud.x[i] - origin[0]) / step;
        let fr = (cloud.y[i] - origin[1]) / step;
        let c = (fc.round() as usize).min(cols - 1);
        let r = (fr.round() as usize).min(rows - 1);
        let dx = cloud.x[i] - (origin[0] + c as f64 * step);
        let dy = cloud.y[i] - (origin[1] + r as f64 * step);
        let d2 = dx * dx + dy * dy;
        let slot = &mut nearest[r * cols + c];
        if slot.is_none_or(|(best, _)| d2 < best) {
            *slot = Some((d2, i));
        }
    }
    let raster: Vec<Option<f64>> = nearest.iter().map(|s| s.map(|(_, i)| -cloud.z[i])).collect();
    let terrain = fill_by_scanline(&raster, cols, rows);

    let top = -lo[2] + CLOTH_LIFT;
    let mut particles: Vec<Particle> = (0..n).map(|_| Particle { pos: top, old: top, movable: true }).collect();
    let neighbors = constraint_lists(cols, rows);
    let rig = params.rigidness as usize;
    let single = SINGLE_MOVE[rig.min(15)];
    let double = DOUBLE_MOVE[rig.min(15)];
    let accel = -GRAVITY * params.time_step * params.time_step;
    let stop = params.class_threshold / 100.0;

    let mut iterations_run = 0;
    for _ in 0..params.iterations {
        iterations_run += 1;
        let before: Vec<f64> = particles.iter().map(|p| p.pos).collect();
        for p in particles.iter_mut() {
            if p.movable {
                let tmp = p.pos;
                p.pos = p.pos + (p.pos - p.old) * (1.0 - DAMPING) + accel;
                p.old = tmp;
            }
        }
        for (a, list) in neighbors.iter().enumerate() {
            for &b in list {
                let diff = particles[b].pos - particles[a].pos;
                match (particles[a].movable, particles[b].movable) {
                    (true, true) => {
                        let d = diff * double;
                        particles[a].pos += d;
                        particles[b].pos -= d;
                    }
                    (true, false) => particles[a].pos += diff * single,
                    (false, true) => particles[b].pos -= diff * single,
                    (false, false) => {}
                }
            }
        }
        let mut max_diff = 0.0f64;
        for (p, b) in particles.iter().zip(&before) {
            if p.movable {
                max_diff = max_diff.max((p.pos - b).abs());
            }
        }
        for (p, &t) in particles.iter_mut().zip(&terrain) {
            if p.movable && p.pos < t {
                p.pos = t;
                p.movable = false;
            }
        }
        if max_diff != 0.0 && max_diff < stop {
            break;
        }
    }
    Ok(Cloth { origin, step, cols, rows, heights: particles.iter().map(|p| p.pos).collect(), iterations_run })
}

/// Classifies every point: `true` when within `class_threshold` of the cloth.
pub fn csf_ground(cloud: &PointCloud, params: &CsfParams) -> Result<Vec<bool>> {
    let cloth = simulate_cloth(cloud, params)?;
    Ok((0..cloud.len())
        .map(|i| (cloth.elevation_at(cloud.x[i], cloud.y[i]) - cloud.z[i]).abs() < params.class_threshold)
        .collect())
}

/// Per-particle spring lists. Each particle links to its right and lower
/// neighbors, both diagonals, and the second neighbors two cells away; springs
/// are registered on both ends, so relaxation visits every spring twice.
fn constraint_lists(cols: usize, rows: usize) -> Vec<Vec<usize>> {
    let id = |c: usize, r: usize| r * cols + c;
    let mut pairs = Vec::with_capacity(cols * rows * 8);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                pairs.push((id(c, r), id(c + 1, r)));
            }
            if r + 1 < rows {
                pairs.push((id(c, r), id(c, r + 1)));
            }
            if c + 1 < cols && r + 1 < rows {
                pairs.push((id(c, r), id(c + 1, r + 1)));
                pairs.push((id(c + 1, r), id(c, r + 1)));
            }
            if c + 2 < cols {
                pairs.push((id(c, r), id(c + 2, r)));
            }
            if r + 2 < rows {
                pairs.push((id(c, r), id(c, r + 2)));
            }
            if c + 2 < cols && r + 2 < rows {
                pairs.push((id(c, r), id(c + 2, r + 2)));
                pairs.push((id(c + 2, r), id(c, r + 2)));
            }
        }
    }
    let mut lists = vec![Vec::with_capacity(16); cols * rows];
    for (a, b) in pairs {
        lists[a].push(b);
        lists[b].push(a);
    }
    lists
}

/// Empty raster cells take the value of the closest filled cell found along
/// their row or column; cells with neither fall back to a breadth-first fill.
fn fill_by_scanline(raster: &[Option<f64>], cols: usize, rows: usize) -> Vec<f64> {
    let mut out: Vec<Option<f64>> = raster.to_vec();
    for r in 0..rows {
        for c in 0..cols {
            if raster[r * cols + c].is_some() {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            let mut consider = |dist: usize, v: f64| {
                if best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, v));
                }
            };
            if let Some(cc) = (c + 1..cols).find(|&cc| raster[r * cols + cc].is_some()) {
                consider(cc - c, raster[r * cols + cc].unwrap());
            }
            if let Some(cc) = (0..c).rev().find(|&cc| raster[r * cols + cc].is_some()) {
                consider(c - cc, raster[r * cols + cc].unwrap());
            }
            if let Some(rr) = (0..r).rev().find(|&rr| raster[rr * cols + c].is_some()) {
                consider(r - rr, raster[rr * cols + c].unwrap());
            }
            if let Some(rr) = (r + 1..rows).find(|&rr| raster[rr * cols + c].is_some()) {
                consider(rr - r, raster[rr * cols + c].unwrap());
            }
            out[r * cols + c] = best.map(|(_, v)| v);
        }
    }
    // breadth-first fill for anything still empty
    let mut queue: std::collections::VecDeque<usize> = (0..out.len()).filter(|&i| out[i].is_some()).collect();
    while let Some(i) = queue.pop_front() {
        let (c, r) = (i % cols, i / cols);
        let v = out[i];
        let mut nbrs = Vec::with_capacity(4);
        if c > 0 {
            nbrs.push(i - 1);
        }
        if c + 1 < cols {
            nbrs.push(i + 1);
        }
        if r > 0 {
            nbrs.push(i - cols);
        }
        if r + 1 < rows {
            nbrs.push(i + cols);
        }
        for j in nbrs {
            if out[j].is_none() {
                out[j] = v;
                queue.push_back(j);
            }
        }
    }
    out.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect()
}
