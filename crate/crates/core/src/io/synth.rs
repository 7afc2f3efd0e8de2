//! Synthetic dual-channel airborne scenes with exact ground truth.
//!
//! Geometry is a sloped terrain carrying trees (ellipsoidal crown on a
//! cylindrical trunk), box buildings with facades, power cables on poles and
//! low-vegetation patches. Each channel is sampled independently at its own
//! density so that per-channel point counts match `density * area` exactly.
//! Reflectance is Gaussian in dB, conditioned on the object class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Channel, Label, PointCloud};
use crate::error::{Error, Result};

/// Mean and standard deviation (dB) of both channels for one surface class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpectrum {
    pub green_mean_db: f64,
    pub green_sigma_db: f64,
    pub nir_mean_db: f64,
    pub nir_sigma_db: f64,
}

impl ClassSpectrum {
    pub const fn new(green_mean_db: f64, nir_mean_db: f64, sigma_db: f64) -> Self {
        Self { green_mean_db, green_sigma_db: sigma_db, nir_mean_db, nir_sigma_db: sigma_db }
    }

    fn for_channel(&self, ch: Channel) -> (f64, f64) {
        match ch {
            Channel::Green532 => (self.green_mean_db, self.green_sigma_db),
            Channel::Nir1064 => (self.nir_mean_db, self.nir_sigma_db),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralModel {
    pub ground: ClassSpectrum,
    pub tree: ClassSpectrum,
    pub low_vegetation: ClassSpectrum,
    pub building: ClassSpectrum,
    pub cable: ClassSpectrum,
}

impl Default for SpectralModel {
    fn default() -> Self {
        Self {
            ground: ClassSpectrum::new(-12.0, -9.0, 2.0),
            tree: ClassSpectrum::new(-15.0, -5.0, 1.5),
            low_vegetation: ClassSpectrum::new(-14.0, -6.0, 1.5),
            building: ClassSpectrum::new(-8.0, -8.0, 2.0),
            cable: ClassSpectrum::new(-20.0, -18.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSceneConfig {
    /// Scene width and depth in meters; the scene spans `[0, w] x [0, d]`.
    pub extent: [f64; 2],
    pub base_elevation: f64,
    /// Terrain slope along +x, degrees.
    pub terrain_slope_deg: f64,
    pub trees: usize,
    pub crown_radius: [f64; 2],
    pub crown_height: [f64; 2],
    pub trunk_height: [f64; 2],
    pub trunk_radius: [f64; 2],
    /// Share of crown-footprint pulses that reach the ground below.
    pub crown_penetration: f64,
    pub buildings: usize,
    pub building_size: [f64; 2],
    pub building_height: [f64; 2],
    /// Facade sampling relative to a nadir-facing surface.
    pub facade_density_factor: f64,
    pub cables: usize,
    pub cable_length: [f64; 2],
    pub cable_height: [f64; 2],
    pub cable_sag: f64,
    pub low_vegetation_patches: usize,
    pub patch_radius: [f64; 2],
    pub patch_height: [f64; 2],
    /// Points per m² for the 532 nm and 1064 nm scanners.
    pub density_green: f64,
    pub density_nir: f64,
    pub outlier_fraction: f64,
    pub spectra: SpectralModel,
    /// Vertical noise on hard surfaces (ground, roofs), meters.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            extent: [150.0, 150.0],
            base_elevation: 200.0,
            terrain_slope_deg: 0.0,
            trees: 130,
            crown_radius: [2.0, 5.0],
            crown_height: [3.0, 8.0],
            trunk_height: [1.5, 4.0],
            trunk_radius: [0.15, 0.35],
            crown_penetration: 0.3,
            buildings: 14,
            building_size: [8.0, 20.0],
            building_height: [4.0, 12.0],
            facade_density_factor: 0.15,
            cables: 3,
            cable_length: [30.0, 60.0],
            cable_height: [8.0, 11.0],
            cable_sag: 1.0,
            low_vegetation_patches: 30,
            patch_radius: [1.0, 3.0],
            patch_height: [0.2, 1.0],
            density_green: 9.1,
            density_nir: 14.7,
            outlier_fraction: 0.0005,
            spectra: SpectralModel::default(),
            noise_sigma: 0.02,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeShape {
    pub cx: f64,
    pub cy: f64,
    pub base_z: f64,
    pub crown_radius: f64,
    pub crown_half_height: f64,
    pub crown_center_z: f64,
    pub trunk_radius: f64,
    pub trunk_top_z: f64,
}

impl TreeShape {
    /// True when `(x, y, z)` lies in the crown ellipsoid or the trunk cylinder.
    pub fn contains(&self, x: f64, y: f64, z: f64, tol: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let r = self.crown_radius + tol;
        let h = self.crown_half_height + tol;
        let dz = z - self.crown_center_z;
        let in_crown = (dx * dx + dy * dy) / (r * r) + dz * dz / (h * h) <= 1.0;
        let in_trunk = (dx * dx + dy * dy).sqrt() <= self.trunk_radius + tol
            && z >= self.base_z - tol
            && z <= self.trunk_top_z + tol;
        in_crown || in_trunk
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingShape {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub base_z: f64,
    pub height: f64,
}

impl BuildingShape {
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn roof_z(&self) -> f64 {
        self.base_z + self.height
    }

    fn distance_xy(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableShape {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub sag: f64,
}

impl CableShape {
    fn at(&self, s: f64) -> [f64; 3] {
        [
            self.a[0] + (self.b[0] - self.a[0]) * s,
            self.a[1] + (self.b[1] - self.a[1]) * s,
            self.a[2] + (self.b[2] - self.a[2]) * s - 4.0 * self.sag * s * (1.0 - s),
        ]
    }

    fn length_xy(&self) -> f64 {
        ((self.b[0] - self.a[0]).powi(2) + (self.b[1] - self.a[1]).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchShape {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub height: f64,
}

/// Object layout of a generated scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub trees: Vec<TreeShape>,
    pub buildings: Vec<BuildingShape>,
    pub cables: Vec<CableShape>,
    pub patches: Vec<PatchShape>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub layout: SceneLayout,
}

#[derive(Clone, Copy)]
enum Surface {
    Ground,
    Tree,
    LowVegetation,
    Building,
    Cable,
    Outlier,
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(Error::Degenerate(format!("scene extent {:?} must be positive", self.extent)));
        }
        if !(self.density_green > 0.0 && self.density_nir > 0.0) {
            return Err(Error::InvalidParameter("channel densities must be > 0".into()));
        }
        let ranges = [
            ("crown_radius", self.crown_radius),
            ("crown_height", self.crown_height),
            ("trunk_height", self.trunk_height),
            ("trunk_radius", self.trunk_radius),
            ("building_size", self.building_size),
            ("building_height", self.building_height),
            ("cable_length", self.cable_length),
            ("cable_height", self.cable_height),
            ("patch_radius", self.patch_radius),
            ("patch_height", self.patch_height),
        ];
        for (name, r) in ranges {
            if !(r[0] > 0.0 && r[1] >= r[0]) {
                return Err(Error::InvalidParameter(format!("{name} range {r:?} must be positive and ordered")));
            }
        }
        if !(0.0..=1.0).contains(&self.crown_penetration) || !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidParameter("crown_penetration / outlier_fraction out of range".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.facade_density_factor >= 0.0) || !(self.cable_sag >= 0.0) {
            return Err(Error::InvalidParameter("noise_sigma, facade_density_factor and cable_sag must be >= 0".into()));
        }
        Ok(())
    }

    pub fn terrain(&self, x: f64, _y: f64) -> f64 {
        self.base_elevation + x * self.terrain_slope_deg.to_radians().tan()
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

fn place_layout(cfg: &SyntheticSceneConfig, rng: &mut ChaCha8Rng) -> SceneLayout {
    let [w, d] = cfg.extent;
    let mut layout = SceneLayout::default();
    const ATTEMPTS: usize = 400;

    for _ in 0..cfg.buildings {
        for _ in 0..ATTEMPTS {
            let sx = uniform(rng, cfg.building_size);
            let sy = uniform(rng, cfg.building_size);
            if sx + 2.0 >= w || sy + 2.0 >= d {
                break;
            }
            let x0 = rng.random_range(1.0..(w - sx - 1.0));
            let y0 = rng.random_range(1.0..(d - sy - 1.0));
            let candidate = BuildingShape {
                x0,
                y0,
                x1: x0 + sx,
                y1: y0 + sy,
                base_z: cfg.terrain(x0 + sx / 2.0, y0 + sy / 2.0),
                height: uniform(rng, cfg.building_height),
            };
            let clear = layout.buildings.iter().all(|b| {
                candidate.x0 > b.x1 + 4.0 || b.x0 > candidate.x1 + 4.0 || candidate.y0 > b.y1 + 4.0 || b.y0 > candidate.y1 + 4.0
            });
            if clear {
                layout.buildings.push(candidate);
                break;
            }
        }
    }

    for _ in 0..cfg.trees {
        for _ in 0..ATTEMPTS {
            let r = uniform(rng, cfg.crown_radius);
            if 2.0 * r >= w || 2.0 * r >= d {
                break;
            }
            let cx = rng.random_range(r..(w - r));
            let cy = rng.random_range(r..(d - r));
            let clear_b = layout.buildings.iter().all(|b| b.distance_xy(cx, cy) > r + 1.0);
            let clear_t = layout.trees.iter().all(|t| {
                let dd = ((t.cx - cx).powi(2) + (t.cy - cy).powi(2)).sqrt();
                dd >= 0.8 * (t.crown_radius + r)
            });
            if clear_b && clear_t {
                let half = uniform(rng, cfg.crown_height) / 2.0;
                let trunk_h = uniform(rng, cfg.trunk_height);
                let base_z = cfg.terrain(cx, cy);
                layout.trees.push(TreeShape {
                    cx,
                    cy,
                    base_z,
                    crown_radius: r,
                    crown_half_height: half,
                    crown_center_z: base_z + trunk_h + half,
                    trunk_radius: uniform(rng, cfg.trunk_radius),
                    trunk_top_z: base_z + trunk_h + half,
                });
                break;
            }
        }
    }

    for _ in 0..cfg.low_vegetation_patches {
        for _ in 0..ATTEMPTS {
            let r = uniform(rng, cfg.patch_radius);
            if 2.0 * r >= w || 2.0 * r >= d {
                break;
            }
            let cx = rng.random_range(r..(w - r));
            let cy = rng.random_range(r..(d - r));
            let clear_b = layout.buildings.iter().all(|b| b.distance_xy(cx, cy) > r + 0.5);
            let clear_t = layout.trees.iter().all(|t| ((t.cx - cx).powi(2) + (t.cy - cy).powi(2)).sqrt() > t.crown_radius + r);
            if clear_b && clear_t {
                layout.patches.push(PatchShape { cx, cy, radius: r, height: uniform(rng, cfg.patch_height) });
                break;
            }
        }
    }

    for _ in 0..cfg.cables {
        for _ in 0..ATTEMPTS {
            let len = uniform(rng, cfg.cable_length);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let ax = rng.random_range(1.0..(w - 1.0));
            let ay = rng.random_range(1.0..(d - 1.0));
            let bx = ax + len * theta.cos();
            let by = ay + len * theta.sin();
            if !(1.0..w - 1.0).contains(&bx) || !(1.0..d - 1.0).contains(&by) {
                continue;
            }
            let h = uniform(rng, cfg.cable_height);
            let cable = CableShape {
                a: [ax, ay, cfg.terrain(ax, ay) + h],
                b: [bx, by, cfg.terrain(bx, by) + h],
                sag: cfg.cable_sag,
            };
            let steps = (len / 0.5).ceil() as usize;
            let clear = (0..=steps).all(|k| {
                let p = cable.at(k as f64 / steps as f64);
                layout.buildings.iter().all(|b| b.distance_xy(p[0], p[1]) > 3.0)
                    && layout.trees.iter().all(|t| ((t.cx - p[0]).powi(2) + (t.cy - p[1]).powi(2)).sqrt() > t.crown_radius + 3.0)
            });
            if clear {
                layout.cables.push(cable);
                break;
            }
        }
    }
    layout
}

pub fn generate_scene(config: &SyntheticSceneConfig) -> Result<PointCloud> {
    Ok(generate_scene_with_layout(config)?.cloud)
}

/// Generates the scene and also returns the object layout used as ground truth.
pub fn generate_scene_with_layout(config: &SyntheticSceneConfig) -> Result<SyntheticScene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layout = place_layout(config, &mut rng);
    let mut cloud = PointCloud::new();
    let mut ground = Vec::new();
    for (channel, density) in [(Channel::Green532, config.density_green), (Channel::Nir1064, config.density_nir)] {
        sample_channel(config, &layout, channel, density, &mut rng, &mut cloud, &mut ground);
    }
    cloud.ground_flag = Some(ground);
    cloud.crs_note = format!("synthetic scene, seed {}", config.seed);
    Ok(SyntheticScene { cloud, layout })
}

fn sample_channel(
    cfg: &SyntheticSceneConfig,
    layout: &SceneLayout,
    channel: Channel,
    density: f64,
    rng: &mut ChaCha8Rng,
    cloud: &mut PointCloud,
    ground: &mut Vec<bool>,
) {
    let [w, d] = cfg.extent;
    let total = (density * w * d).round() as usize;
    let noise = Normal::new(0.0, cfg.noise_sigma.max(1e-12)).unwrap();
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut emit = |rng: &mut ChaCha8Rng, x: f64, y: f64, z: f64, surface: Surface| {
        let spec = match surface {
            Surface::Ground | Surface::Outlier => cfg.spectra.ground,
            Surface::Tree => cfg.spectra.tree,
            Surface::LowVegetation => cfg.spectra.low_vegetation,
            Surface::Building => cfg.spectra.building,
            Surface::Cable => cfg.spectra.cable,
        };
        let (mean, sigma) = spec.for_channel(channel);
        let refl = mean + sigma * std_normal.sample(rng);
        let label = if matches!(surface, Surface::Tree) { Label::Tree } else { Label::NonTree };
        cloud.push(x, y, z, channel, refl as f32, label);
        ground.push(matches!(surface, Surface::Ground));
    };

    // Budget of points that are not nadir column returns.
    let facade_counts: Vec<usize> = layout
        .buildings
        .iter()
        .map(|b| {
            let perimeter = 2.0 * ((b.x1 - b.x0) + (b.y1 - b.y0));
            (density * perimeter * b.height * cfg.facade_density_factor).round() as usize
        })
        .collect();
    let trunk_counts: Vec<usize> = layout
        .trees
        .iter()
        .map(|t| {
            let area = std::f64::consts::TAU * t.trunk_radius * (t.trunk_top_z - t.crown_half_height - t.base_z);
            (density * area * 0.3).round() as usize
        })
        .collect();
    let cable_counts: Vec<usize> = layout.cables.iter().map(|c| (density * 0.1 * c.length_xy()).round() as usize).collect();
    let pole_counts: Vec<usize> = layout
        .cables
        .iter()
        .map(|c| (density * 0.3 * (c.a[2] - cfg.terrain(c.a[0], c.a[1]))).round() as usize)
        .collect();
    let outliers = (total as f64 * cfg.outlier_fraction).round() as usize;
    let extras: usize =
        facade_counts.iter().sum::<usize>() + trunk_counts.iter().sum::<usize>() + cable_counts.iter().sum::<usize>()
            + 2 * pole_counts.iter().sum::<usize>()
            + outliers;
    let column = total.saturating_sub(extras);

    for _ in 0..column {
        let x = rng.random_range(0.0..w);
        let y = rng.random_range(0.0..d);
        let terrain = cfg.terrain(x, y);
        if let Some(b) = layout.buildings.iter().find(|b| b.contains_xy(x, y)) {
            let z = b.roof_z() + noise.sample(rng);
            emit(rng, x, y, z, Surface::Building);
            continue;
        }
        let crown = layout.trees.iter().find(|t| (x - t.cx).powi(2) + (y - t.cy).powi(2) < t.crown_radius.powi(2));
        if let Some(t) = crown {
            if rng.random::<f64>() >= cfg.crown_penetration {
                let rr = ((x - t.cx).powi(2) + (y - t.cy).powi(2)) / t.crown_radius.powi(2);
                let half = t.crown_half_height * (1.0 - rr).sqrt();
                let u: f64 = rng.random();
                let z = t.crown_center_z + half * (1.0 - 2.0 * u * u);
                emit(rng, x, y, z, Surface::Tree);
                continue;
            }
        }
        let patch = layout.patches.iter().find(|p| (x - p.cx).powi(2) + (y - p.cy).powi(2) < p.radius.powi(2));
        if let Some(p) = patch {
            if rng.random::<f64>() < 0.8 {
                let z = terrain + p.height * rng.random::<f64>().sqrt();
                emit(rng, x, y, z, Surface::LowVegetation);
                continue;
            }
        }
        let z = terrain + noise.sample(rng);
        emit(rng, x, y, z, Surface::Ground);
    }

    for (b, &count) in layout.buildings.iter().zip(&facade_counts) {
        let sx = b.x1 - b.x0;
        let sy = b.y1 - b.y0;
        let perimeter = 2.0 * (sx + sy);
        for _ in 0..count {
            let s = rng.random_range(0.0..perimeter);
            let (x, y) = if s < sx {
                (b.x0 + s, b.y0)
            } else if s < sx + sy {
                (b.x1, b.y0 + (s - sx))
            } else if s < 2.0 * sx + sy {
                (b.x1 - (s - sx - sy), b.y1)
            } else {
                (b.x0, b.y1 - (s - 2.0 * sx - sy))
            };
            let z = b.base_z + rng.random_range(0.0..b.height);
            emit(rng, x, y, z, Surface::Building);
        }
    }
    for (t, &count) in layout.trees.iter().zip(&trunk_counts) {
        let top = t.trunk_top_z - t.crown_half_height;
        for _ in 0..count {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let z = t.base_z + rng.random_range(0.0..(top - t.base_z).max(1e-6));
            emit(rng, t.cx + t.trunk_radius * a.cos(), t.cy + t.trunk_radius * a.sin(), z, Surface::Tree);
        }
    }
    for ((c, &count), &poles) in layout.cables.iter().zip(&cable_counts).zip(&pole_counts) {
        for _ in 0..count {
            let p = c.at(rng.random());
            emit(rng, p[0], p[1], p[2], Surface::Cable);
        }
        for end in [c.a, c.b] {
            let base = cfg.terrain(end[0], end[1]);
            for _ in 0..poles {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let z = base + rng.random_range(0.0..(end[2] - base));
                emit(rng, end[0] + 0.25 * a.cos(), end[1] + 0.25 * a.sin(), z, Surface::Cable);
            }
        }
    }
    for _ in 0..outliers {
        let x = rng.random_range(0.0..w);
        let y = rng.random_range(0.0..d);
        let dz = if rng.random::<bool>() { rng.random_range(40.0..80.0) } else { rng.random_range(-30.0..-5.0) };
        emit(rng, x, y, cfg.terrain(x, y) + dz, Surface::Outlier);
    }
}
