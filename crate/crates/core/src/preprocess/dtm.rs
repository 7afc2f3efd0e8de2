//! Terrain raster from classified ground points, and height normalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtmParams {
    pub cell: f64,
    /// Ground points averaged per cell.
    pub k: usize,
    pub power: f64,
    /// Cells whose nearest ground point is farther than `nodata_cells * cell` are nodata.
    pub nodata_cells: f64,
}

impl Default for DtmParams {
    fn default() -> Self {
        Self { cell: 1.0, k: 8, power: 2.0, nodata_cells: 10.0 }
    }
}

/// Regular raster; cell `(ix, iy)` covers `[x0 + ix*cell, x0 + (ix+1)*cell)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtmGrid {
    pub x0: f64,
    pub y0: f64,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub nodata: Vec<bool>,
}

impl DtmGrid {
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x0 + (ix as f64 + 0.5) * self.cell, self.y0 + (iy as f64 + 0.5) * self.cell)
    }

    pub fn value(&self, ix: usize, iy: usize) -> Option<f64> {
        let i = iy * self.width + ix;
        (!self.nodata[i]).then_some(self.values[i])
    }

    pub fn valid_cells(&self) -> usize {
        self.nodata.iter().filter(|&&n| !n).count()
    }

    /// Copy where every nodata cell holds the value of the nearest valid cell.
    pub fn filled(&self) -> Result<DtmGrid> {
        let valid: Vec<usize> = (0..self.values.len()).filter(|&i| !self.nodata[i]).collect();
        if valid.is_empty() {
            return Err(Error::Degenerate("DTM has no valid cells".into()));
        }
        let mut out = self.clone();
        if valid.len() == self.values.len() {
            return Ok(out);
        }
        let centers = valid
            .iter()
            .map(|&i| {
                let (x, y) = self.cell_center(i % self.width, i / self.width);
                [x, y, 0.0]
            })
            .collect();
        let index = SpatialIndex::from_points(centers, valid.clone());
        for i in 0..out.values.len() {
            if out.nodata[i] {
                let (x, y) = self.cell_center(i % self.width, i / self.width);
                let nn = index.knn([x, y, 0.0], 1)[0].id;
                out.values[i] = self.values[nn];
                out.nodata[i] = false;
            }
        }
        Ok(out)
    }

    /// Bilinear interpolation between the four surrounding cell centers,
    /// clamped at the raster border. Assumes no nodata cells (see [`DtmGrid::filled`]).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let gx = (x - self.x0) / self.cell - 0.5;
        let gy = (y - self.y0) / self.cell - 0.5;
        let (i0, i1, tx) = axis_weights(gx, self.width);
        let (j0, j1, ty) = axis_weights(gy, self.height);
        let v = |i: usize, j: usize| self.values[j * self.width + i];
        v(i0, j0) * (1.0 - tx) * (1.0 - ty) + v(i1, j0) * tx * (1.0 - ty) + v(i0, j1) * (1.0 - tx) * ty + v(i1, j1) * tx * ty
    }
}

fn axis_weights(g: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 || g <= 0.0 {
        return (0, 0.min(n - 1), 0.0);
    }
    let max = (n - 1) as f64;
    if g >= max {
        return (n - 1, n - 1, 0.0);
    }
    let i0 = g.floor() as usize;
    (i0, i0 + 1, g - i0 as f64)
}

/// Builds the DTM over the XY extent of the whole cloud from its
/// `ground_flag` points: inverse-distance weighting of the `k` nearest ground
/// points (planimetric distance) to each cell center.
pub fn build_dtm(cloud: &PointCloud, params: &DtmParams) -> Result<DtmGrid> {
    if !(params.cell > 0.0) || params.k < 1 {
        return Err(Error::InvalidParameter(format!("DTM needs cell > 0 and k >= 1, got {params:?}")));
    }
    let flags = cloud.ground_flag.as_ref().ok_or_else(|| Error::MissingColumn("ground_flag".into()))?;
    let ground: Vec<usize> = (0..cloud.len()).filter(|&i| flags[i]).collect();
    if ground.is_empty() {
        return Err(Error::EmptyInput("no ground points to build a DTM from".into()));
    }
    let (lo, hi) = cloud.bounds().unwrap();
    let width = ((hi[0] - lo[0]) / params.cell).floor() as usize + 1;
    let height = ((hi[1] - lo[1]) / params.cell).floor() as usize + 1;
    let index = SpatialIndex::from_points(ground.iter().map(|&i| [cloud.x[i], cloud.y[i], 0.0]).collect(), ground.clone());
    let max_dist = params.nodata_cells * params.cell;

    let cells: Vec<Option<f64>> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let cx = lo[0] + ((i % width) as f64 + 0.5) * params.cell;
            let cy = lo[1] + ((i / width) as f64 + 0.5) * params.cell;
            let hits = index.knn([cx, cy, 0.0], params.k);
            if hits[0].dist > max_dist {
                return None;
            }
            let exact: Vec<_> = hits.iter().filter(|h| h.dist == 0.0).collect();
            if !exact.is_empty() {
                return Some(exact.iter().map(|h| cloud.z[h.id]).sum::<f64>() / exact.len() as f64);
            }
            let (mut num, mut den) = (0.0, 0.0);
            for h in &hits {
                let w = 1.0 / h.dist.powf(params.power);
                num += w * cloud.z[h.id];
                den += w;
            }
            Some(num / den)
        })
        .collect();
    Ok(DtmGrid {
        x0: lo[0],
        y0: lo[1],
        cell: params.cell,
        width,
        height,
        nodata: cells.iter().map(|c| c.is_none()).collect(),
        values: cells.iter().map(|c| c.unwrap_or(f64::NAN)).collect(),
    })
}

/// `h_norm = z - dtm(x, y)` with bilinear DTM interpolation; nodata cells fall
/// back to their nearest valid cell.
pub fn normalize_height(cloud: &PointCloud, dtm: &DtmGrid) -> Result<Vec<f32>> {
    let filled = dtm.filled()?;
    Ok((0..cloud.len()).into_par_iter().map(|i| (cloud.z[i] - filled.sample(cloud.x[i], cloud.y[i])) as f32).collect())
}

/// ESRI ASCII grid text of the DTM (rows written north to south).
pub fn dtm_to_ascii_grid(dtm: &DtmGrid) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "ncols {}", dtm.width);
    let _ = writeln!(s, "nrows {}", dtm.height);
    let _ = writeln!(s, "xllcorner {}", dtm.x0);
    let _ = writeln!(s, "yllcorner {}", dtm.y0);
    let _ = writeln!(s, "cellsize {}", dtm.cell);
    let _ = writeln!(s, "NODATA_value -9999");
    for iy in (0..dtm.height).rev() {
        let row: Vec<String> = (0..dtm.width)
            .map(|ix| match dtm.value(ix, iy) {
                Some(v) => format!("{v:.3}"),
                None => "-9999".into(),
            })
            .collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}
