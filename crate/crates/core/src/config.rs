//! Named pruning parameter sets.

use std::fmt;

use crate::error::{Error, Result};
use crate::pruning::PruningConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// ŝ = 5: prunes as soon as vertices get moderately dense.
    Aggressive,
    /// ŝ = 15.
    Cautious,
    /// No pruning at all.
    Reference,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Aggressive, Preset::Cautious, Preset::Reference];

    /// Thresholds for this preset, or `None` when nothing is pruned.
    pub fn pruning(self) -> Option<PruningConfig> {
        match self {
            Preset::Aggressive => Some(PruningConfig::aggressive()),
            Preset::Cautious => Some(PruningConfig::cautious()),
            Preset::Reference => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Aggressive => "p_aggressive",
            Preset::Cautious => "p_cautious",
            Preset::Reference => "p_reference",
        })
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{s}` (expected p_aggressive, p_cautious or p_reference)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!("aggressive".parse::<Preset>().is_err());
        assert!(Preset::Reference.pruning().is_none());
        assert_eq!(Preset::Cautious.pruning().unwrap().density_threshold, 15.0);
    }
}
