//! Denoising, channel merging, ground filtering, terrain model, height
//! normalization and subsampling.

pub mod csf;
pub mod dtm;
pub mod merge;
pub mod sor;
pub mod voxel;

pub use csf::{csf_ground, simulate_cloth, CsfParams};
pub use dtm::{build_dtm, normalize_height, DtmGrid, DtmParams};
pub use merge::{merge_channels, merge_cloud, MergeParams};
pub use sor::{sor_filter, SorOutcome, SorParams};
pub use voxel::{majority_label, voxel_subsample};
