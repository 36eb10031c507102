use serde::{Deserialize, Serialize};

use crate::edge::DEFAULT_MAHALANOBIS_GATE;
use crate::error::{Error, Result};

/// Thresholds for vertex and edge pruning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruningConfig {
    /// Vertices whose scale-invariant density exceeds this are pruned (`ŝ`).
    pub density_threshold: f64,
    /// Density is summed over this many nearest neighbors (`N̂`).
    pub neighbor_count: usize,
    /// Pruning stops once at most this many vertices are prunable (`n̂`).
    pub min_prunable: usize,
    /// The most recent vertices, by insertion order, that are never pruned (`m̂`).
    pub keep_recent: usize,
    /// Edge pruning target degree per vertex (`ê`).
    pub max_edges_per_vertex: usize,
    /// Largest allowed detour ratio for removing an edge (`d̂`).
    pub max_path_ratio: f64,
    /// χ² gate above which two constraints on the same pair contradict.
    pub mahalanobis_gate: f64,
}

impl PruningConfig {
    pub const fn aggressive() -> Self {
        Self {
            density_threshold: 5.0,
            neighbor_count: 10,
            min_prunable: 50,
            keep_recent: 50,
            max_edges_per_vertex: 5,
            max_path_ratio: 5.0,
            mahalanobis_gate: DEFAULT_MAHALANOBIS_GATE,
        }
    }

    pub const fn cautious() -> Self {
        Self {
            density_threshold: 15.0,
            ..Self::aggressive()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.density_threshold > 0.0) {
            return bad("density threshold must be positive");
        }
        if !(self.max_path_ratio > 1.0) {
            return bad("path ratio threshold must exceed 1");
        }
        if self.neighbor_count == 0
            || self.min_prunable == 0
            || self.keep_recent == 0
            || self.max_edges_per_vertex == 0
        {
            return bad("counts must be at least 1");
        }
        if !(self.mahalanobis_gate > 0.0) {
            return bad("mahalanobis gate must be positive");
        }
        Ok(())
    }
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self::aggressive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values() {
        let a = PruningConfig::aggressive();
        assert_eq!(
            (a.density_threshold, a.neighbor_count, a.min_prunable, a.keep_recent, a.max_edges_per_vertex, a.max_path_ratio),
            (5.0, 10, 50, 50, 5, 5.0)
        );
        let c = PruningConfig::cautious();
        assert_eq!(
            (c.density_threshold, c.neighbor_count, c.min_prunable, c.keep_recent, c.max_edges_per_vertex, c.max_path_ratio),
            (15.0, 10, 50, 50, 5, 5.0)
        );
        a.validate().unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_thresholds() {
        let mut c = PruningConfig::aggressive();
        c.max_path_ratio = 1.0;
        assert!(c.validate().is_err());
        let mut c = PruningConfig::aggressive();
        c.neighbor_count = 0;
        assert!(c.validate().is_err());
        let mut c = PruningConfig::aggressive();
        c.density_threshold = 0.0;
        assert!(c.validate().is_err());
    }
}
