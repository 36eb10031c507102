//! Vertex removal.
//!
//! [`marginalize_sid`] moves each loop closure of the removed vertex one step
//! forward or backward along the odometry chain, so a corrupted loop closure
//! stays a single corrupted edge. [`marginalize_chow_liu`] is the comparison
//! baseline: it builds every pairwise constraint among the neighbors and keeps
//! a maximum-weight spanning tree of them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::edge::{combine, fuse, mahalanobis_gap, Combination, Edge};
use crate::error::{Error, Result};
use crate::graph::{PoseGraph, VertexId};

/// How a pruned vertex's constraints are carried over to its neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginalization {
    /// Re-anchor loop closures along the odometry chain.
    Sid,
    /// Spanning tree over the pairwise neighbor clique.
    ChowLiu,
}

impl fmt::Display for Marginalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marginalization::Sid => "sid",
            Marginalization::ChowLiu => "chow_liu",
        })
    }
}

impl std::str::FromStr for Marginalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sid" => Ok(Marginalization::Sid),
            "chow_liu" | "chow-liu" => Ok(Marginalization::ChowLiu),
            other => Err(Error::InvalidArgument(format!("unknown marginalization method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContradictionOutcome {
    KeepOdometryDropLoop,
    DropBoth,
}

impl fmt::Display for ContradictionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContradictionOutcome::KeepOdometryDropLoop => "keep_odometry_drop_loop",
            ContradictionOutcome::DropBoth => "drop_both",
        })
    }
}

impl std::str::FromStr for ContradictionOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep_odometry_drop_loop" => Ok(ContradictionOutcome::KeepOdometryDropLoop),
            "drop_both" => Ok(ContradictionOutcome::DropBoth),
            other => Err(Error::InvalidArgument(format!("unknown verdict `{other}`"))),
        }
    }
}

/// A contradiction detected while merging two constraints on one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub a: VertexId,
    pub b: VertexId,
    pub outcome: ContradictionOutcome,
    pub gap: f64,
    /// Corrupted-provenance loop closures discarded by this verdict.
    pub dropped_corrupted: usize,
    /// Genuine loop closures discarded by this verdict.
    pub dropped_genuine: usize,
}

/// Adds `edge`, merging it with anything already on the same vertex pair and
/// applying the contradiction policy.
pub(crate) fn insert_or_combine(graph: &mut PoseGraph, edge: Edge, gate: f64) -> Result<Vec<Verdict>> {
    let mut verdicts = Vec::new();
    let mut acc = Some(edge);
    for id in graph.edges_between(acc.as_ref().unwrap().from, acc.as_ref().unwrap().to) {
        let Some(cur) = acc.take() else { break };
        let old = graph.remove_edge(id)?;
        let gap = mahalanobis_gap(&old, &cur)?;
        let dropped = |edges: &[&Edge]| {
            let bad = edges.iter().filter(|e| e.is_loop_closure() && e.is_corrupted()).count();
            let good = edges.iter().filter(|e| e.is_loop_closure() && !e.is_corrupted()).count();
            (bad, good)
        };
        acc = match combine(&old, &cur, gate)? {
            Combination::Fused(f) => Some(f),
            Combination::KeepOdometryDropLoop(kept) => {
                let loser = if old.is_loop_closure() { &old } else { &cur };
                let (bad, good) = dropped(&[loser]);
                verdicts.push(Verdict {
                    a: old.from,
                    b: old.to,
                    outcome: ContradictionOutcome::KeepOdometryDropLoop,
                    gap,
                    dropped_corrupted: bad,
                    dropped_genuine: good,
                });
                Some(kept)
            }
            Combination::DropBoth => {
                let (bad, good) = dropped(&[&old, &cur]);
                verdicts.push(Verdict {
                    a: old.from,
                    b: old.to,
                    outcome: ContradictionOutcome::DropBoth,
                    gap,
                    dropped_corrupted: bad,
                    dropped_genuine: good,
                });
                None
            }
        };
    }
    if let Some(e) = acc {
        graph.add_edge(e)?;
    }
    Ok(verdicts)
}

/// Adds `edge`, fusing it with any existing constraint on the pair without a
/// consistency check.
pub(crate) fn insert_or_fuse(graph: &mut PoseGraph, edge: Edge) -> Result<()> {
    let mut acc = edge;
    for id in graph.edges_between(acc.from, acc.to) {
        let old = graph.remove_edge(id)?;
        acc = fuse(&old, &acc)?;
    }
    graph.add_edge(acc)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SidOutcome {
    pub verdicts: Vec<Verdict>,
    /// Re-anchored loop closures that would have connected a vertex to itself.
    pub discarded_self_edges: usize,
}

/// Removes `v` and moves its loop closures to the odometry neighbor closer to
/// each loop closure's far end.
///
/// The odometry edges into and out of `v` are composed into one odometry edge
/// that keeps the chain intact. If `v` ends a chain, every loop closure
/// collapses into its single odometry neighbor.
pub fn marginalize_sid(graph: &mut PoseGraph, v: VertexId, gate: f64) -> Result<SidOutcome> {
    if !graph.contains_vertex(v) {
        return Err(Error::UnknownVertex(v));
    }
    let e_in = graph.odometry_in(v).map(|id| graph.edge(id).unwrap().clone());
    let e_out = graph.odometry_out(v).map(|id| graph.edge(id).unwrap().clone());
    if e_in.is_none() && e_out.is_none() {
        return Err(Error::NotOnOdometryChain(v));
    }
    let loops: Vec<Edge> = graph
        .incident(v)
        .map(|id| graph.edge(id).unwrap())
        .filter(|e| e.is_loop_closure())
        .cloned()
        .collect();

    // Build every replacement edge before touching the graph.
    let mut replacements = Vec::with_capacity(loops.len() + 1);
    if let (Some(i), Some(o)) = (&e_in, &e_out) {
        replacements.push(i.compose(o)?);
    }
    let mut discarded_self_edges = 0;
    for e in &loops {
        let other = e.other(v);
        let to_prev = match (&e_in, &e_out) {
            (Some(i), Some(o)) => {
                let p = graph.pose(other).unwrap();
                let d_in = p.translation_distance(&graph.pose(i.from).unwrap());
                let d_out = p.translation_distance(&graph.pose(o.to).unwrap());
                d_in < d_out
            }
            (Some(_), None) => true,
            _ => false,
        };
        let target = if to_prev {
            e_in.as_ref().unwrap().from
        } else {
            e_out.as_ref().unwrap().to
        };
        if target == other {
            discarded_self_edges += 1;
            continue;
        }
        let moved = if to_prev {
            e_in.as_ref().unwrap().compose(&e.oriented_from(v)?)?
        } else {
            e.oriented_from(other)?.compose(e_out.as_ref().unwrap())?
        };
        replacements.push(moved);
    }

    graph.remove_vertex(v)?;
    let mut verdicts = Vec::new();
    for r in replacements {
        verdicts.extend(insert_or_combine(graph, r, gate)?);
    }
    Ok(SidOutcome {
        verdicts,
        discarded_self_edges,
    })
}

/// Bookkeeping from one Chow–Liu marginalization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CliqueReport {
    pub incident_edges: usize,
    pub corrupted_incident: usize,
    pub neighbors: usize,
    /// Pairwise constraints built among the neighbors.
    pub candidates: usize,
    pub corrupted_candidates: usize,
    /// Candidates kept in the spanning tree.
    pub retained: usize,
    pub retained_corrupted: usize,
}

/// Tree weight of a candidate constraint: `½ log det(I + Λ)`.
pub fn mutual_information_proxy(edge: &Edge) -> f64 {
    let m = nalgebra::Matrix3::identity() + edge.info.matrix();
    0.5 * m.determinant().ln()
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Removes `v`, connects all of its neighbors pairwise through it and keeps
/// the maximum-weight spanning tree of those constraints. The composed
/// odometry edge between `v`'s chain neighbors is always kept.
pub fn marginalize_chow_liu(graph: &mut PoseGraph, v: VertexId) -> Result<CliqueReport> {
    if !graph.contains_vertex(v) {
        return Err(Error::UnknownVertex(v));
    }
    let mut report = CliqueReport::default();
    let mut grouped: BTreeMap<VertexId, Vec<Edge>> = BTreeMap::new();
    for id in graph.incident(v) {
        let e = graph.edge(id).unwrap();
        report.incident_edges += 1;
        report.corrupted_incident += usize::from(e.is_corrupted());
        grouped.entry(e.other(v)).or_default().push(e.clone());
    }
    report.neighbors = grouped.len();
    // Constraints neighbor -> v and v -> neighbor. A single edge is used as
    // stored in one of the two directions; parallel edges are fused first.
    let mut inward = BTreeMap::new();
    let mut outward = BTreeMap::new();
    for (n, edges) in &grouped {
        let (into, out) = if let [e] = edges.as_slice() {
            (e.oriented_from(*n)?, e.oriented_from(v)?)
        } else {
            let mut acc = edges[0].oriented_from(v)?;
            for e in &edges[1..] {
                acc = fuse(&acc, e)?.oriented_from(v)?;
            }
            (acc.invert()?, acc)
        };
        inward.insert(*n, into);
        outward.insert(*n, out);
    }
    let chain_pair = match (graph.odometry_in(v), graph.odometry_out(v)) {
        (Some(i), Some(o)) => Some((graph.edge(i).unwrap().from, graph.edge(o).unwrap().to)),
        _ => None,
    };

    let nodes: Vec<VertexId> = grouped.keys().copied().collect();
    let mut candidates: Vec<(usize, usize, Edge, f64)> = Vec::new();
    let mut chain_candidate = None;
    for (ia, a) in nodes.iter().enumerate() {
        for (ib, b) in nodes.iter().enumerate().skip(ia + 1) {
            let (from, to) = match chain_pair {
                Some((p, n)) if (p, n) == (*b, *a) => (b, a),
                _ => (a, b),
            };
            let cand = inward[from].compose(&outward[to])?;
            report.candidates += 1;
            report.corrupted_candidates += usize::from(cand.is_corrupted());
            let w = mutual_information_proxy(&cand);
            if chain_pair == Some((*from, *to)) {
                chain_candidate = Some(candidates.len());
            }
            candidates.push((ia, ib, cand, w));
        }
    }

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&x, &y| {
        let (cx, cy) = (&candidates[x], &candidates[y]);
        let forced = |i: usize| Some(i) == chain_candidate;
        forced(y)
            .cmp(&forced(x))
            .then(cy.3.total_cmp(&cx.3))
            .then((cx.0, cx.1).cmp(&(cy.0, cy.1)))
    });
    let mut sets = DisjointSet((0..nodes.len()).collect());
    let mut keep = Vec::new();
    for i in order {
        let (a, b, _, _) = &candidates[i];
        if sets.union(*a, *b) {
            keep.push(i);
        }
    }
    keep.sort_unstable();

    graph.remove_vertex(v)?;
    let mut candidates: Vec<Option<Edge>> = candidates.into_iter().map(|c| Some(c.2)).collect();
    for i in keep {
        let edge = candidates[i].take().unwrap();
        report.retained += 1;
        report.retained_corrupted += usize::from(edge.is_corrupted());
        insert_or_fuse(graph, edge)?;
    }
    Ok(report)
}
