//! File formats, dataset splitting and synthetic scenes.

pub mod columnar;
pub mod labels;
pub mod las;
pub mod split;
pub mod synth;

pub use columnar::{read_columnar, write_columnar};
pub use labels::{read_labels, write_labels};
pub use las::{read_las, write_las, ChannelSource, LasReadOptions, LasWriteOptions, ReflectanceSource};
pub use split::{split_plots, PlotSplit, DEFAULT_SPLIT_RATIOS};
pub use synth::{generate_scene, generate_scene_with_layout, SyntheticScene, SyntheticSceneConfig};
