use std::collections::HashMap;

use crate::density::PointSet;
use crate::error::{Error, Result};
use crate::graph::{PoseGraph, VertexId};
use crate::pruning::config::PruningConfig;
use crate::pruning::log::{PruneLog, PruneRecord};
use crate::pruning::marginalize::{marginalize_chow_liu, marginalize_sid, Marginalization};

/// A per-vertex density used to pick pruning candidates.
pub trait DensityMeasure {
    /// Density of point `i`, and the distance from `i` beyond which removing
    /// another point cannot change that density.
    fn evaluate(&self, points: &PointSet, i: usize) -> (f64, f64);
}

/// Scale-invariant density summed over the closest `neighbors` points.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedSid {
    pub neighbors: usize,
}

impl DensityMeasure for TruncatedSid {
    fn evaluate(&self, points: &PointSet, i: usize) -> (f64, f64) {
        let knn = points.knn_with_distances(i, self.neighbors);
        let reach = if knn.len() < self.neighbors {
            f64::INFINITY
        } else {
            knn.last().map_or(f64::INFINITY, |x| x.0)
        };
        (points.sid_from_knn(&knn).density, reach)
    }
}

/// Vertices eligible for pruning: not among the `keep_recent` newest, not a
/// chain end, not the gauge and not flagged as protected.
pub fn prunable_vertices(graph: &PoseGraph, keep_recent: usize) -> Vec<VertexId> {
    let mut seqs: Vec<u64> = graph.vertices().map(|v| v.seq).collect();
    if seqs.len() <= keep_recent {
        return Vec::new();
    }
    let cutoff = if keep_recent == 0 {
        u64::MAX
    } else {
        let nth = seqs.len() - keep_recent;
        *seqs.select_nth_unstable(nth).1
    };
    let gauge = graph.gauge();
    graph
        .vertices()
        .filter(|v| v.prunable && v.seq < cutoff && Some(v.id) != gauge && !graph.is_session_boundary(v.id))
        .map(|v| v.id)
        .collect()
}

/// Repeatedly marginalizes the densest prunable vertex while its truncated
/// scale-invariant density exceeds the threshold and more than
/// `min_prunable` vertices remain prunable.
pub fn prune_vertices(graph: &mut PoseGraph, cfg: &PruningConfig, method: Marginalization) -> Result<PruneLog> {
    prune_vertices_with(
        graph,
        cfg,
        method,
        &TruncatedSid {
            neighbors: cfg.neighbor_count,
        },
    )
}

/// [`prune_vertices`] with a caller-supplied density.
pub fn prune_vertices_with(
    graph: &mut PoseGraph,
    cfg: &PruningConfig,
    method: Marginalization,
    measure: &dyn DensityMeasure,
) -> Result<PruneLog> {
    cfg.validate()?;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut log = PruneLog::new();
    let (mut points, ids) = PointSet::from_graph(graph)?;
    let index: HashMap<VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut density = vec![0.0; ids.len()];
    let mut reach = vec![0.0; ids.len()];
    for i in 0..ids.len() {
        (density[i], reach[i]) = measure.evaluate(&points, i);
    }

    loop {
        let prunable = prunable_vertices(graph, cfg.keep_recent);
        if prunable.len() <= cfg.min_prunable {
            break;
        }
        let mut best: Option<(VertexId, f64)> = None;
        for v in prunable {
            let d = density[index[&v]];
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((v, d));
            }
        }
        let Some((victim, d)) = best else { break };
        if d <= cfg.density_threshold {
            break;
        }
        let (vertices_before, edges_before) = (graph.vertex_count(), graph.edge_count());
        let (verdicts, clique) = match method {
            Marginalization::Sid => (marginalize_sid(graph, victim, cfg.mahalanobis_gate)?.verdicts, None),
            Marginalization::ChowLiu => (Vec::new(), Some(marginalize_chow_liu(graph, victim)?)),
        };
        log.push(PruneRecord::Marginalized {
            vertex: victim,
            method,
            density: d,
            gate: cfg.mahalanobis_gate,
            vertices_before,
            edges_before,
            vertices_after: graph.vertex_count(),
            edges_after: graph.edge_count(),
        });
        if let Some(report) = clique {
            log.push(PruneRecord::Clique { vertex: victim, report });
        }
        for v in verdicts {
            log.push(PruneRecord::Verdict {
                a: v.a,
                b: v.b,
                outcome: v.outcome,
                gap: v.gap,
            });
        }

        let removed = index[&victim];
        let at = points.position(removed);
        points.remove(removed);
        let stale: Vec<usize> = points
            .indices()
            .filter(|&j| {
                let p = points.position(j);
                (p[0] - at[0]).hypot(p[1] - at[1]) <= reach[j]
            })
            .collect();
        for j in stale {
            (density[j], reach[j]) = measure.evaluate(&points, j);
        }
    }
    Ok(log)
}
