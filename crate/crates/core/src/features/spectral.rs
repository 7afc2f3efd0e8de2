//! Reflectance unit conversion and the pseudo-NDVI index.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// `10^(r_db / 10)`.
pub fn db_to_linear(r_db: f64) -> Result<f64> {
    if !r_db.is_finite() {
        return Err(Error::Numeric(format!("reflectance {r_db} dB is not finite")));
    }
    Ok(10f64.powf(r_db / 10.0))
}

/// Inverse of [`db_to_linear`]; `linear` must be strictly positive.
pub fn linear_to_db(linear: f64) -> Result<f64> {
    if !(linear > 0.0) || !linear.is_finite() {
        return Err(Error::Numeric(format!("linear reflectance {linear} must be positive and finite")));
    }
    Ok(10.0 * linear.log10())
}

/// Pseudo-NDVI from NIR and green reflectance given in dB.
///
/// Both values go through [`db_to_linear`] before the normalized difference,
/// so the denominator is always positive and the result lies in (-1, 1).
pub fn pndvi(nir_db: f64, green_db: f64) -> Result<f64> {
    let nir = db_to_linear(nir_db)?;
    let green = db_to_linear(green_db)?;
    Ok((nir - green) / (nir + green))
}

/// Derives the `pndvi` column. Points flagged in `cross_missing` get a 0
/// placeholder and keep their flag; downstream feature assembly imputes them.
pub fn derive_pndvi(cloud: &PointCloud) -> Result<Vec<f32>> {
    let green = cloud.refl_green_db.as_ref().ok_or_else(|| Error::MissingColumn("refl_green_db".into()))?;
    let nir = cloud.refl_nir_db.as_ref().ok_or_else(|| Error::MissingColumn("refl_nir_db".into()))?;
    let missing = cloud.cross_missing.as_deref();
    (0..cloud.len())
        .map(|i| {
            if missing.is_some_and(|m| m[i]) {
                Ok(0.0)
            } else {
                pndvi(nir[i] as f64, green[i] as f64).map(|v| v as f32)
            }
        })
        .collect()
}
