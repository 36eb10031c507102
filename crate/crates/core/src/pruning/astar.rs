use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::graph::{EdgeId, PoseGraph, VertexId};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    estimate: f64,
    cost: f64,
    vertex: VertexId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on estimate, then on vertex id.
        other
            .estimate
            .total_cmp(&self.estimate)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Length of the shortest path from `start` to `goal`, with each edge
/// weighted by the Euclidean distance between its endpoint positions and
/// `excluded` ignored. Returns `+∞` when `goal` is unreachable.
///
/// The straight-line heuristic is consistent for these weights, so the first
/// time `goal` is popped its cost is optimal.
pub fn astar_len(graph: &PoseGraph, start: VertexId, goal: VertexId, excluded: Option<EdgeId>) -> f64 {
    if start == goal {
        return 0.0;
    }
    let (Some(goal_pose), Some(_)) = (graph.pose(goal), graph.pose(start)) else {
        return f64::INFINITY;
    };
    let heuristic = |v: VertexId| graph.pose(v).unwrap().translation_distance(&goal_pose);
    let mut best: HashMap<VertexId, f64> = HashMap::from([(start, 0.0)]);
    let mut open = BinaryHeap::from([Entry {
        estimate: heuristic(start),
        cost: 0.0,
        vertex: start,
    }]);
    while let Some(Entry { cost, vertex, .. }) = open.pop() {
        if vertex == goal {
            return cost;
        }
        if cost > best[&vertex] {
            continue;
        }
        let here = graph.pose(vertex).unwrap();
        for id in graph.incident(vertex) {
            if Some(id) == excluded {
                continue;
            }
            let next = graph.edge(id).unwrap().other(vertex);
            let c = cost + here.translation_distance(&graph.pose(next).unwrap());
            if best.get(&next).is_none_or(|&b| c < b) {
                best.insert(next, c);
                open.push(Entry {
                    estimate: c + heuristic(next),
                    cost: c,
                    vertex: next,
                });
            }
        }
    }
    f64::INFINITY
}
