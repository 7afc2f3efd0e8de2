use std::fmt;

use serde::{Deserialize, Serialize};

/// Which spectral columns accompany the three coordinate features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureConfig {
    #[serde(rename = "xyz")]
    Xyz,
    #[serde(rename = "xyz+green")]
    XyzGreen,
    #[serde(rename = "xyz+nir")]
    XyzNir,
    #[serde(rename = "xyz+pndvi")]
    XyzPndvi,
    #[serde(rename = "xyz+green+nir")]
    XyzGreenNir,
    #[serde(rename = "xyz+green+nir+pndvi")]
    XyzGreenNirPndvi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralColumn {
    Green,
    Nir,
    Pndvi,
}

impl SpectralColumn {
    pub fn name(self) -> &'static str {
        match self {
            SpectralColumn::Green => "green_db",
            SpectralColumn::Nir => "nir_db",
            SpectralColumn::Pndvi => "pndvi",
        }
    }
}

impl FeatureConfig {
    pub const ALL: [FeatureConfig; 6] = [
        FeatureConfig::Xyz,
        FeatureConfig::XyzGreen,
        FeatureConfig::XyzNir,
        FeatureConfig::XyzPndvi,
        FeatureConfig::XyzGreenNir,
        FeatureConfig::XyzGreenNirPndvi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureConfig::Xyz => "xyz",
            FeatureConfig::XyzGreen => "xyz+green",
            FeatureConfig::XyzNir => "xyz+nir",
            FeatureConfig::XyzPndvi => "xyz+pndvi",
            FeatureConfig::XyzGreenNir => "xyz+green+nir",
            FeatureConfig::XyzGreenNirPndvi => "xyz+green+nir+pndvi",
        }
    }

    /// Accepts the canonical name, case-insensitively, with or without the `xyz+` prefix.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase().replace(' ', "");
        let full = if s.starts_with("xyz") { s } else { format!("xyz+{}", s.trim_start_matches('+')) };
        Self::ALL.into_iter().find(|c| c.name() == full)
    }

    pub fn spectral(self) -> &'static [SpectralColumn] {
        use SpectralColumn::*;
        match self {
            FeatureConfig::Xyz => &[],
            FeatureConfig::XyzGreen => &[Green],
            FeatureConfig::XyzNir => &[Nir],
            FeatureConfig::XyzPndvi => &[Pndvi],
            FeatureConfig::XyzGreenNir => &[Green, Nir],
            FeatureConfig::XyzGreenNirPndvi => &[Green, Nir, Pndvi],
        }
    }

    /// Point-wise feature count (coordinates plus spectral columns).
    pub fn dim(self) -> usize {
        3 + self.spectral().len()
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_names() {
        assert_eq!(FeatureConfig::Xyz.dim(), 3);
        assert_eq!(FeatureConfig::XyzGreenNirPndvi.dim(), 6);
        for c in FeatureConfig::ALL {
            assert_eq!(FeatureConfig::parse(c.name()), Some(c));
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert_eq!(FeatureConfig::parse("+pNDVI"), Some(FeatureConfig::XyzPndvi));
        assert_eq!(FeatureConfig::parse("green+nir"), Some(FeatureConfig::XyzGreenNir));
        assert_eq!(FeatureConfig::parse("rgb"), None);
    }
}
