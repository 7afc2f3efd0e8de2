//! Tree point extraction from dual-wavelength (532 nm / 1064 nm) airborne LiDAR.
//!
//! The crate covers the whole chain: ingest and synthetic scenes ([`io`]),
//! denoising, channel merging, ground filtering and height normalization
//! ([`preprocess`]), reflectance-derived features ([`features`]), a small
//! point-wise classifier ([`classifier`]) and the evaluation / spectral
//! ablation harness ([`eval`]).

pub mod classifier;
pub mod cloud;
pub mod error;
pub mod eval;
pub mod index;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod preprocess;

pub use cloud::{Channel, Label, Point, PointCloud, SplitTag};
pub use error::{Error, ErrorCategory, Result};
pub use index::{build_index, Neighbor, SpatialIndex};
