//! Columnar point-cloud model.
//!
//! Every per-point attribute lives in its own `Vec`. Mandatory columns are
//! always present; optional columns are `Option<Vec<_>>`, so the presence flags
//! written to disk are derived from the data itself and cannot drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Laser wavelength of the scanner that produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    Green532,
    Nir1064,
}

impl Channel {
    pub fn code(self) -> u8 {
        match self {
            Channel::Green532 => 0,
            Channel::Nir1064 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Channel::Green532),
            1 => Some(Channel::Nir1064),
            _ => None,
        }
    }

    pub fn wavelength_nm(self) -> u32 {
        match self {
            Channel::Green532 => 532,
            Channel::Nir1064 => 1064,
        }
    }

    /// Accepts `green`, `532`, `nir`, `1064` (case-insensitive).
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "green" | "532" | "green532" => Some(Channel::Green532),
            "nir" | "1064" | "nir1064" => Some(Channel::Nir1064),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Channel::Green532 => Channel::Nir1064,
            Channel::Nir1064 => Channel::Green532,
        }
    }
}

/// Semantic label. `Tree` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NonTree,
    Tree,
    Unlabeled,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::NonTree => 0,
            Label::Tree => 1,
            Label::Unlabeled => 255,
        }
    }

    pub fn from_code(code: u8) -> Self {
        match code {
            0 => Label::NonTree,
            1 => Label::Tree,
            _ => Label::Unlabeled,
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::NonTree => Label::Tree,
            Label::Tree => Label::NonTree,
            Label::Unlabeled => Label::Unlabeled,
        }
    }
}

/// Dataset partition a point was assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::Val, SplitTag::Test];

    pub fn code(self) -> u8 {
        match self {
            SplitTag::Train => 0,
            SplitTag::Val => 1,
            SplitTag::Test => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SplitTag::Train),
            1 => Some(SplitTag::Val),
            2 => Some(SplitTag::Test),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitTag::Train),
            "val" => Some(SplitTag::Val),
            "test" => Some(SplitTag::Test),
            _ => None,
        }
    }
}

/// Row view of a single point, assembled from the columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub channel: Channel,
    pub reflectance_db: f32,
    pub label: Label,
    pub ground_flag: Option<bool>,
    pub h_norm: Option<f32>,
    pub refl_green_db: Option<f32>,
    pub refl_nir_db: Option<f32>,
    pub pndvi: Option<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub channel: Vec<Channel>,
    pub reflectance_db: Vec<f32>,
    pub label: Vec<Label>,
    pub ground_flag: Option<Vec<bool>>,
    pub h_norm: Option<Vec<f32>>,
    pub refl_green_db: Option<Vec<f32>>,
    pub refl_nir_db: Option<Vec<f32>>,
    /// Set when a point found no neighbor of the other channel during merging.
    pub cross_missing: Option<Vec<bool>>,
    pub pndvi: Option<Vec<f32>>,
    pub split: Option<Vec<SplitTag>>,
    pub crs_note: String,
}

/// Names of the optional columns, in on-disk bit order.
pub const OPTIONAL_COLUMNS: [&str; 7] = [
    "ground_flag",
    "h_norm",
    "refl_green_db",
    "refl_nir_db",
    "cross_missing",
    "pndvi",
    "split",
];

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            channel: Vec::with_capacity(n),
            reflectance_db: Vec::with_capacity(n),
            label: Vec::with_capacity(n),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Appends a point carrying only the mandatory columns. Must not be used
    /// once optional columns exist.
    pub fn push(&mut self, x: f64, y: f64, z: f64, channel: Channel, reflectance_db: f32, label: Label) {
        debug_assert!(self.presence_bits() == 0, "push on a cloud with optional columns");
        self.x.push(x);
        self.y.push(y);
        self.z.push(z);
        self.channel.push(channel);
        self.reflectance_db.push(reflectance_db);
        self.label.push(label);
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        [self.x[i], self.y[i], self.z[i]]
    }

    pub fn point(&self, i: usize) -> Point {
        Point {
            x: self.x[i],
            y: self.y[i],
            z: self.z[i],
            channel: self.channel[i],
            reflectance_db: self.reflectance_db[i],
            label: self.label[i],
            ground_flag: self.ground_flag.as_ref().map(|c| c[i]),
            h_norm: self.h_norm.as_ref().map(|c| c[i]),
            refl_green_db: self.refl_green_db.as_ref().map(|c| c[i]),
            refl_nir_db: self.refl_nir_db.as_ref().map(|c| c[i]),
            pndvi: self.pndvi.as_ref().map(|c| c[i]),
        }
    }

    /// Bitmap of present optional columns, bit order as [`OPTIONAL_COLUMNS`].
    pub fn presence_bits(&self) -> u32 {
        let flags = [
            self.ground_flag.is_some(),
            self.h_norm.is_some(),
            self.refl_green_db.is_some(),
            self.refl_nir_db.is_some(),
            self.cross_missing.is_some(),
            self.pndvi.is_some(),
            self.split.is_some(),
        ];
        flags
            .iter()
            .enumerate()
            .fold(0u32, |acc, (bit, &on)| if on { acc | (1 << bit) } else { acc })
    }

    pub fn count_channel(&self, channel: Channel) -> usize {
        self.channel.iter().filter(|&&c| c == channel).count()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.label.iter().filter(|&&l| l == label).count()
    }

    /// Checks column lengths and the value-domain invariants of every present column.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let check = |name: &str, len: usize| -> Result<()> {
            if len != n {
                Err(Error::LengthMismatch(format!("column `{name}` has {len} rows, expected {n}")))
            } else {
                Ok(())
            }
        };
        check("y", self.y.len())?;
        check("z", self.z.len())?;
        check("channel", self.channel.len())?;
        check("reflectance_db", self.reflectance_db.len())?;
        check("label", self.label.len())?;
        if let Some(c) = &self.ground_flag {
            check("ground_flag", c.len())?;
        }
        if let Some(c) = &self.h_norm {
            check("h_norm", c.len())?;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate("non-finite h_norm".into()));
            }
        }
        if let Some(c) = &self.refl_green_db {
            check("refl_green_db", c.len())?;
        }
        if let Some(c) = &self.refl_nir_db {
            check("refl_nir_db", c.len())?;
        }
        if let Some(c) = &self.cross_missing {
            check("cross_missing", c.len())?;
        }
        if let Some(c) = &self.pndvi {
            check("pndvi", c.len())?;
            if c.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(Error::Degenerate("pndvi outside [-1, 1]".into()));
            }
        }
        if let Some(c) = &self.split {
            check("split", c.len())?;
        }
        let finite = |v: &Vec<f64>| v.iter().all(|c| c.is_finite());
        if !(finite(&self.x) && finite(&self.y) && finite(&self.z)) {
            return Err(Error::Degenerate("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// New cloud holding the rows at `ids`, in that order.
    pub fn select(&self, ids: &[usize]) -> PointCloud {
        fn pick<T: Copy>(col: &[T], ids: &[usize]) -> Vec<T> {
            ids.iter().map(|&i| col[i]).collect()
        }
        fn pick_opt<T: Copy>(col: &Option<Vec<T>>, ids: &[usize]) -> Option<Vec<T>> {
            col.as_ref().map(|c| pick(c, ids))
        }
        PointCloud {
            x: pick(&self.x, ids),
            y: pick(&self.y, ids),
            z: pick(&self.z, ids),
            channel: pick(&self.channel, ids),
            reflectance_db: pick(&self.reflectance_db, ids),
            label: pick(&self.label, ids),
            ground_flag: pick_opt(&self.ground_flag, ids),
            h_norm: pick_opt(&self.h_norm, ids),
            refl_green_db: pick_opt(&self.refl_green_db, ids),
            refl_nir_db: pick_opt(&self.refl_nir_db, ids),
            cross_missing: pick_opt(&self.cross_missing, ids),
            pndvi: pick_opt(&self.pndvi, ids),
            split: pick_opt(&self.split, ids),
            crs_note: self.crs_note.clone(),
        }
    }

    pub fn filter_channel(&self, channel: Channel) -> PointCloud {
        let ids: Vec<usize> = (0..self.len()).filter(|&i| self.channel[i] == channel).collect();
        self.select(&ids)
    }

    pub fn split_ids(&self, tag: SplitTag) -> Result<Vec<usize>> {
        let split = self.split.as_ref().ok_or_else(|| Error::MissingColumn("split".into()))?;
        Ok((0..self.len()).filter(|&i| split[i] == tag).collect())
    }

    /// Concatenates two clouds. Optional columns survive only if both sides have them.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        fn cat<T: Copy>(a: &[T], b: &[T]) -> Vec<T> {
            a.iter().chain(b.iter()).copied().collect()
        }
        fn cat_opt<T: Copy>(a: &Option<Vec<T>>, b: &Option<Vec<T>>) -> Option<Vec<T>> {
            match (a, b) {
                (Some(a), Some(b)) => Some(cat(a, b)),
                _ => None,
            }
        }
        PointCloud {
            x: cat(&self.x, &other.x),
            y: cat(&self.y, &other.y),
            z: cat(&self.z, &other.z),
            channel: cat(&self.channel, &other.channel),
            reflectance_db: cat(&self.reflectance_db, &other.reflectance_db),
            label: cat(&self.label, &other.label),
            ground_flag: cat_opt(&self.ground_flag, &other.ground_flag),
            h_norm: cat_opt(&self.h_norm, &other.h_norm),
            refl_green_db: cat_opt(&self.refl_green_db, &other.refl_green_db),
            refl_nir_db: cat_opt(&self.refl_nir_db, &other.refl_nir_db),
            cross_missing: cat_opt(&self.cross_missing, &other.cross_missing),
            pndvi: cat_opt(&self.pndvi, &other.pndvi),
            split: cat_opt(&self.split, &other.split),
            crs_note: self.crs_note.clone(),
        }
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty cloud.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        if self.is_empty() {
            return None;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..self.len() {
            let p = self.position(i);
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }
}
