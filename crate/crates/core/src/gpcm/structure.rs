use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Constraint pattern on the eigen-decomposed component covariances
/// `Σ_g = λ_g D_g A_g D_g'`. The three letters give volume, shape and
/// orientation: `E`qual across components, `V`ariable, or `I`dentity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CovStructure {
    EII,
    VII,
    EEI,
    VEI,
    EVI,
    VVI,
    EEE,
    EEV,
    VEV,
    VVV,
    EVE,
    VVE,
    VEE,
    EVV,
}

impl CovStructure {
    pub const ALL: [CovStructure; 14] = [
        Self::EII,
        Self::VII,
        Self::EEI,
        Self::VEI,
        Self::EVI,
        Self::VVI,
        Self::EEE,
        Self::EEV,
        Self::VEV,
        Self::VVV,
        Self::EVE,
        Self::VVE,
        Self::VEE,
        Self::EVV,
    ];

    /// Structures with closed-form or simple alternating M-steps.
    pub const FITTABLE: [CovStructure; 10] = [
        Self::EII,
        Self::VII,
        Self::EEI,
        Self::VEI,
        Self::EVI,
        Self::VVI,
        Self::EEE,
        Self::EEV,
        Self::VEV,
        Self::VVV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::EII => "EII",
            Self::VII => "VII",
            Self::EEI => "EEI",
            Self::VEI => "VEI",
            Self::EVI => "EVI",
            Self::VVI => "VVI",
            Self::EEE => "EEE",
            Self::EEV => "EEV",
            Self::VEV => "VEV",
            Self::VVV => "VVV",
            Self::EVE => "EVE",
            Self::VVE => "VVE",
            Self::VEE => "VEE",
            Self::EVV => "EVV",
        }
    }

    /// EVE, VVE, VEE and EVV need an MM algorithm and are not fitted here.
    pub fn is_fittable(self) -> bool {
        !matches!(self, Self::EVE | Self::VVE | Self::VEE | Self::EVV)
    }

    /// Number of free covariance parameters.
    ///
    /// EVV is counted as `Gp(p+1) - (G-1)`, which breaks
    /// the family pattern (`Gp(p+1)/2 - (G-1)` would be expected). EVV is
    /// never fitted, so the value only matters for reporting.
    pub fn cov_param_count(self, g: usize, p: usize) -> usize {
        let full = p * (p + 1) / 2;
        match self {
            Self::EII => 1,
            Self::VII => g,
            Self::EEI => p,
            Self::VEI => p + g - 1,
            Self::EVI => g * p - g + 1,
            Self::VVI => g * p,
            Self::EEE => full,
            Self::EEV => g * full - (g - 1) * p,
            Self::VEV => g * full - (g - 1) * (p - 1),
            Self::VVV => g * full,
            Self::EVE => full + (g - 1) * (p - 1),
            Self::VVE => full + (g - 1) * p,
            Self::VEE => full + (g - 1),
            Self::EVV => g * p * (p + 1) - (g - 1),
        }
    }
}

/// Total free parameters: mixing proportions, means and covariances.
pub fn free_param_count(structure: CovStructure, g: usize, p: usize) -> usize {
    (g - 1) + g * p + structure.cov_param_count(g, p)
}

impl fmt::Display for CovStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == upper)
            .ok_or_else(|| Error::UnknownStructure(s.to_owned()))
    }
}
