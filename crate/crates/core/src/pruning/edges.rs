use std::collections::BTreeSet;

use crate::error::Result;
use crate::graph::{EdgeId, PoseGraph, VertexId};
use crate::pruning::astar::astar_len;
use crate::pruning::config::PruningConfig;
use crate::pruning::log::{PruneLog, PruneRecord};

/// How much longer the shortest path between the endpoints of `edge` gets
/// when the edge is removed, relative to their straight-line distance.
pub fn path_ratio(graph: &PoseGraph, edge: EdgeId) -> f64 {
    let Some(e) = graph.edge(edge) else {
        return f64::INFINITY;
    };
    let (a, b) = (graph.pose(e.from).unwrap(), graph.pose(e.to).unwrap());
    let direct = a.translation_distance(&b);
    let detour = astar_len(graph, e.from, e.to, Some(edge));
    if direct > 0.0 {
        detour / direct
    } else if detour == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Removes low-information loop closures around the busiest vertices until
/// every vertex has at most `max_edges_per_vertex` edges or cannot shed one
/// without lengthening some path by more than `max_path_ratio`.
///
/// Odometry edges count toward a vertex's degree but are never removed, so
/// the graph stays connected.
pub fn prune_edges(graph: &mut PoseGraph, cfg: &PruningConfig) -> Result<PruneLog> {
    cfg.validate()?;
    let mut log = PruneLog::new();
    let mut exempt: BTreeSet<VertexId> = BTreeSet::new();
    loop {
        let busiest = graph
            .vertex_ids()
            .filter(|v| !exempt.contains(v))
            .map(|v| (graph.degree(v), v))
            .filter(|&(d, _)| d > cfg.max_edges_per_vertex)
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some((_, v)) = busiest else { break };

        let mut candidates: Vec<(f64, EdgeId)> = graph
            .incident(v)
            .filter_map(|id| {
                let e = graph.edge(id)?;
                e.is_loop_closure().then(|| (e.info.trace(), id))
            })
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let chosen = candidates.into_iter().find_map(|(trace, id)| {
            let ratio = path_ratio(graph, id);
            (ratio <= cfg.max_path_ratio).then_some((trace, id, ratio))
        });
        match chosen {
            Some((trace, id, path_ratio)) => {
                let edges_before = graph.edge_count();
                let e = graph.remove_edge(id)?;
                log.push(PruneRecord::EdgeRemoved {
                    edge: id,
                    from: e.from,
                    to: e.to,
                    trace,
                    path_ratio,
                    edges_before,
                    edges_after: graph.edge_count(),
                });
            }
            None => {
                exempt.insert(v);
                log.push(PruneRecord::Exempt { vertex: v });
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::Edge;
    use crate::information::InformationMatrix;
    use crate::pose::Pose2;

    fn exact(g: &PoseGraph, a: u64, b: u64) -> Pose2 {
        g.pose(VertexId(a)).unwrap().between(&g.pose(VertexId(b)).unwrap())
    }

    fn four_cycle() -> PoseGraph {
        let mut g = PoseGraph::new();
        for (i, p) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].iter().enumerate() {
            g.add_vertex(VertexId(i as u64), Pose2::new(p.0, p.1, 0.0)).unwrap();
        }
        for i in 0..3 {
            let m = exact(&g, i, i + 1);
            g.add_edge(Edge::odometry(VertexId(i), VertexId(i + 1), m, InformationMatrix::identity()))
                .unwrap();
        }
        let m = exact(&g, 3, 0);
        g.add_edge(Edge::loop_closure(VertexId(3), VertexId(0), m, InformationMatrix::identity()))
            .unwrap();
        g
    }

    fn cfg(e_hat: usize, d_hat: f64) -> PruningConfig {
        PruningConfig {
            max_edges_per_vertex: e_hat,
            max_path_ratio: d_hat,
            ..PruningConfig::aggressive()
        }
    }

    #[test]
    fn low_degree_graph_is_unchanged() {
        let mut g = four_cycle();
        let before = g.clone();
        assert!(prune_edges(&mut g, &cfg(2, 5.0)).unwrap().is_empty());
        assert_eq!(g, before);
    }

    #[test]
    fn four_cycle_loop_is_pruned_only_when_the_detour_is_allowed() {
        let mut g = four_cycle();
        let log = prune_edges(&mut g, &cfg(1, 3.0)).unwrap();
        assert_eq!(log.removed_edges().count(), 1);
        assert_eq!(g.loop_closure_count(), 0);

        let mut g = four_cycle();
        let log = prune_edges(&mut g, &cfg(1, 2.999)).unwrap();
        assert_eq!(log.removed_edges().count(), 0);
        assert_eq!(g.edge_count(), 4);
        assert!(g.is_connected());
    }

    #[test]
    fn star_of_loops_sheds_smallest_traces_first() {
        // Hub at the center of a ring of 8 vertices; ring edges are odometry,
        // hub edges are loop closures with distinct information.
        let mut g = PoseGraph::new();
        g.add_vertex(VertexId(100), Pose2::new(0.0, 0.0, 0.0)).unwrap();
        for k in 0..8u64 {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            g.add_vertex(VertexId(k), Pose2::new(a.cos(), a.sin(), 0.0)).unwrap();
        }
        for k in 0..7u64 {
            let m = exact(&g, k, k + 1);
            g.add_edge(Edge::odometry(VertexId(k), VertexId(k + 1), m, InformationMatrix::identity()))
                .unwrap();
        }
        let weights = [7.0, 2.0, 9.0, 1.0, 5.0, 3.0, 8.0, 6.0];
        let mut by_trace = Vec::new();
        for k in 0..8u64 {
            let w = weights[k as usize];
            let m = exact(&g, 100, k);
            let id = g
                .add_edge(Edge::loop_closure(
                    VertexId(100),
                    VertexId(k),
                    m,
                    InformationMatrix::from_diagonal(w, w, w).unwrap(),
                ))
                .unwrap();
            by_trace.push((3.0 * w, id));
        }
        // Every hub edge survives the ratio guard: the detour through a
        // neighbor spoke is at most 1 + 2 sin(π/8) + 1 < 5 times the spoke.
        for &(_, id) in &by_trace {
            assert!(path_ratio(&g, id) <= 5.0);
        }
        by_trace.sort_by(|a, b| a.0.total_cmp(&b.0));
        let expected: Vec<EdgeId> = by_trace[..3].iter().map(|x| x.1).collect();

        let log = prune_edges(&mut g, &cfg(5, 5.0)).unwrap();
        let removed: Vec<EdgeId> = log.removed_edges().collect();
        assert_eq!(removed, expected);
        assert_eq!(g.degree(VertexId(100)), 5);
    }

    #[test]
    fn vertex_without_passing_candidate_is_exempted() {
        let mut g = four_cycle();
        let log = prune_edges(&mut g, &cfg(1, 1.5)).unwrap();
        assert!(log.records.iter().any(|r| matches!(r, PruneRecord::Exempt { .. })));
        assert_eq!(g.edge_count(), 4);
    }
}
