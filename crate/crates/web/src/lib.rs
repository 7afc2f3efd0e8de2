//! Browser bindings: pNDVI calculator, metrics from confusion counts and a
//! cloth-simulation ground profile on a small synthetic slice.
//!
//! The `*_json` functions are plain Rust so they can be tested natively; the
//! exported wrappers only translate errors.

use mstree_core::eval::{metrics, ConfusionMatrix};
use mstree_core::features::{db_to_linear, pndvi};
use mstree_core::io::{generate_scene_with_layout, SyntheticSceneConfig};
use mstree_core::preprocess::{simulate_cloth, CsfParams};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// pNDVI for one (NIR, green) pair in dB and the curve over a NIR range at
/// fixed green reflectance.
pub fn pndvi_json(nir_db: f64, green_db: f64, nir_min: f64, nir_max: f64, steps: usize) -> Result<String, String> {
    if steps < 2 || !(nir_max > nir_min) {
        return Err("need steps >= 2 and nir_max > nir_min".into());
    }
    let value = pndvi(nir_db, green_db).map_err(|e| e.to_string())?;
    let mut curve = Vec::with_capacity(steps);
    for i in 0..steps {
        let n = nir_min + (nir_max - nir_min) * i as f64 / (steps - 1) as f64;
        curve.push([n, pndvi(n, green_db).map_err(|e| e.to_string())?]);
    }
    Ok(json!({
        "value": value,
        "nir_linear": db_to_linear(nir_db).map_err(|e| e.to_string())?,
        "green_linear": db_to_linear(green_db).map_err(|e| e.to_string())?,
        "curve": curve,
    })
    .to_string())
}

pub fn metrics_json(tp: u32, fp: u32, fn_: u32, tn: u32) -> Result<String, String> {
    let cm = ConfusionMatrix { tp: tp.into(), fp: fp.into(), fn_: fn_.into(), tn: tn.into() };
    let m = metrics(&cm).map_err(|e| e.to_string())?;
    serde_json::to_string(&m).map_err(|e| e.to_string())
}

/// Generates a 60 x 12 m slice, runs the cloth filter and returns the points
/// of the central 4 m strip with predicted and true ground flags, plus the
/// cloth elevation along the strip axis.
pub fn ground_profile_json(slope_deg: f64, cloth_resolution: f64, rigidness: u32, seed: u32) -> Result<String, String> {
    let synth = SyntheticSceneConfig {
        extent: [60.0, 12.0],
        terrain_slope_deg: slope_deg,
        trees: 5,
        buildings: 1,
        building_size: [8.0, 10.0],
        cables: 0,
        low_vegetation_patches: 2,
        seed: seed.into(),
        ..Default::default()
    };
    let params = CsfParams { cloth_resolution, rigidness, ..Default::default() };
    params.validate().map_err(|e| e.to_string())?;
    let scene = generate_scene_with_layout(&synth).map_err(|e| e.to_string())?;
    let cloud = &scene.cloud;
    let cloth = simulate_cloth(cloud, &params).map_err(|e| e.to_string())?;
    let truth = cloud.ground_flag.clone().unwrap_or_else(|| vec![false; cloud.len()]);
    let (mut points, mut agree, mut total) = (Vec::new(), 0usize, 0usize);
    for i in 0..cloud.len() {
        let ground = (cloth.elevation_at(cloud.x[i], cloud.y[i]) - cloud.z[i]).abs() < params.class_threshold;
        total += 1;
        agree += (ground == truth[i]) as usize;
        if (cloud.y[i] - 6.0).abs() < 2.0 {
            points.push(json!([cloud.x[i], cloud.z[i], ground, truth[i]]));
        }
    }
    let cloth_line: Vec<[f64; 2]> = (0..=120).map(|i| i as f64 * 0.5).map(|x| [x, cloth.elevation_at(x, 6.0)]).collect();
    Ok(json!({
        "points": points,
        "cloth": cloth_line,
        "agreement": agree as f64 / total as f64,
        "total_points": total,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn pndvi_curve(nir_db: f64, green_db: f64, nir_min: f64, nir_max: f64, steps: usize) -> Result<String, JsError> {
    to_js(pndvi_json(nir_db, green_db, nir_min, nir_max, steps))
}

#[wasm_bindgen]
pub fn metrics_from_counts(tp: u32, fp: u32, fn_: u32, tn: u32) -> Result<String, JsError> {
    to_js(metrics_json(tp, fp, fn_, tn))
}

#[wasm_bindgen]
pub fn ground_profile(slope_deg: f64, cloth_resolution: f64, rigidness: u32, seed: u32) -> Result<String, JsError> {
    to_js(ground_profile_json(slope_deg, cloth_resolution, rigidness, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn pndvi_endpoints() {
        let v = parse(&pndvi_json(0.0, -10.0, -20.0, 0.0, 5).unwrap());
        assert!((v["value"].as_f64().unwrap() - 0.9 / 1.1).abs() < 1e-12);
        assert_eq!(v["curve"].as_array().unwrap().len(), 5);
        assert_eq!(v["curve"][4][0], 0.0);
        assert!(pndvi_json(0.0, 0.0, 1.0, 0.0, 5).is_err());
    }

    #[test]
    fn metrics_example() {
        let v = parse(&metrics_json(7754, 1020, 1226, 40000).unwrap());
        assert!((v["iou_tree"].as_f64().unwrap() - 77.54).abs() < 1e-9);
        assert!(metrics_json(0, 0, 0, 0).is_err());
    }

    #[test]
    fn ground_profile_separates_ground() {
        let v = parse(&ground_profile_json(5.0, 1.0, 2, 3).unwrap());
        assert!(v["agreement"].as_f64().unwrap() > 0.95);
        assert_eq!(v["cloth"].as_array().unwrap().len(), 121);
        assert!(!v["points"].as_array().unwrap().is_empty());
        assert!(ground_profile_json(0.0, 1.0, 7, 0).is_err());
    }
}
