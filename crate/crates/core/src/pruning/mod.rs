//! Vertex pruning, marginalization and edge pruning.

mod astar;
mod config;
mod edges;
mod log;
mod marginalize;
mod vertex;

pub use astar::astar_len;
pub use config::PruningConfig;
pub use edges::{path_ratio, prune_edges};
pub use log::{PruneLog, PruneRecord};
pub use marginalize::{
    marginalize_chow_liu, marginalize_sid, mutual_information_proxy, CliqueReport, ContradictionOutcome,
    Marginalization, SidOutcome, Verdict,
};
pub use vertex::{prunable_vertices, prune_vertices, prune_vertices_with, DensityMeasure, TruncatedSid};
