//! Spectral features, robust normalization and feature-matrix assembly.

pub mod assemble;
pub mod config;
pub mod normalize;
pub mod spectral;

pub use assemble::{
    apply_normalization, assemble_features, fit_features, fit_normalization, raw_features, training_rows, FeatureMatrix,
    FeatureOptions, NeighborhoodParams, NormalizationParams,
};
pub use config::{FeatureConfig, SpectralColumn};
pub use normalize::{fit_column, percentile_sorted, ColumnNorm};
pub use spectral::{db_to_linear, derive_pndvi, linear_to_db, pndvi};
