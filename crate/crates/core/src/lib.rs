//! Pose-graph pruning for long-running 2D SLAM.
//!
//! Vertices are picked for removal by their scale-invariant density, removed
//! in a way that keeps a wrong loop closure a single wrong edge, and busy
//! vertices then shed their least informative loop closures. Around that sit
//! an SE(2) least-squares optimizer, synthetic graph generators, a g2o-style
//! file format and a Monte Carlo harness.
//!
//! ```
//! use sidprune::prelude::*;
//!
//! let (mut graph, _truth) = gen_grid(&GridSpec::new(12, 12, 0.3))?;
//! let mut cfg = PruningConfig::aggressive();
//! cfg.keep_recent = 10;
//! cfg.min_prunable = 10;
//! let log = prune_vertices(&mut graph, &cfg, Marginalization::Sid)?;
//! assert!(graph.vertex_count() < 144);
//! assert_eq!(log.marginalized().count(), 144 - graph.vertex_count());
//! # Ok::<(), sidprune::Error>(())
//! ```

pub mod config;
pub mod density;
pub mod edge;
pub mod error;
pub mod eval;
pub mod graph;
pub mod information;
pub mod io;
pub mod optimizer;
pub mod pose;
pub mod pruning;
pub mod synthetic;

pub use error::{Error, Result};

/// The commonly used types and functions.
pub mod prelude {
    pub use crate::config::Preset;
    pub use crate::density::PointSet;
    pub use crate::edge::{combine, mahalanobis_gap, Combination, Edge, EdgeKind, Provenance};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{map_error, relative_map_error, run_monte_carlo, Method, MonteCarloConfig};
    pub use crate::graph::{EdgeId, PoseGraph, VertexId};
    pub use crate::information::InformationMatrix;
    pub use crate::io::{parse_graph, serialize_graph};
    pub use crate::optimizer::{chi2, optimize, OptimizerConfig, RobustKernel};
    pub use crate::pose::Pose2;
    pub use crate::pruning::{
        marginalize_chow_liu, marginalize_sid, prune_edges, prune_vertices, Marginalization, PruneLog,
        PruningConfig,
    };
    pub use crate::synthetic::{
        add_noise, corrupt_loop_closures, gen_grid, gen_random_trajectory, CorruptionSpec, GridSpec, NoiseSpec,
    };
}

/// Guide chapters, compiled as doctests so the book cannot drift from the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/density.md")]
    pub struct Density;
    #[doc = include_str!("../../../book/src/marginalization.md")]
    pub struct Marginalization;
    #[doc = include_str!("../../../book/src/edge-pruning.md")]
    pub struct EdgePruning;
    #[doc = include_str!("../../../book/src/optimizer.md")]
    pub struct Optimizer;
    #[doc = include_str!("../../../book/src/file-format.md")]
    pub struct FileFormat;
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    pub struct MonteCarlo;
}
