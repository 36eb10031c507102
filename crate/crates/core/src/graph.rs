//! The pose-graph data model.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::edge::{Edge, EdgeKind, Provenance};
use crate::error::{Error, Result};
use crate::pose::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl EdgeId {
    pub const UNASSIGNED: EdgeId = EdgeId(u64::MAX);
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == EdgeId::UNASSIGNED {
            f.write_str("-")
        } else {
            write!(f, "e{}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub pose: Pose2,
    /// Insertion order; strictly increasing.
    pub seq: u64,
    /// Vertices flagged `false` are never considered for pruning.
    pub prunable: bool,
}

/// Vertices, edges and an index of the odometry chain.
///
/// Each vertex has at most one incoming and one outgoing odometry edge and the
/// odometry edges never close a cycle, so they form one simple path per
/// session. Edge ids are assigned from a counter and never reused, which keeps
/// every derived ordering deterministic.
#[derive(Debug, Clone, Default)]
pub struct PoseGraph {
    vertices: BTreeMap<VertexId, Vertex>,
    edges: BTreeMap<EdgeId, Edge>,
    adjacency: HashMap<VertexId, BTreeSet<EdgeId>>,
    odometry_in: HashMap<VertexId, EdgeId>,
    odometry_out: HashMap<VertexId, EdgeId>,
    gauge: Option<VertexId>,
    next_edge: u64,
    next_seq: u64,
}

impl PartialEq for PoseGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges && self.gauge() == other.gauge()
    }
}

impl PoseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, id: VertexId, pose: Pose2) -> Result<&Vertex> {
        if self.vertices.contains_key(&id) {
            return Err(Error::DuplicateVertex(id));
        }
        if !pose.is_finite() {
            return Err(Error::InvalidArgument(format!("vertex {id} has a non-finite pose")));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.adjacency.entry(id).or_default();
        Ok(self.vertices.entry(id).or_insert(Vertex {
            id,
            pose,
            seq,
            prunable: true,
        }))
    }

    /// Like [`add_vertex`](Self::add_vertex) but with an explicit insertion
    /// index, which must exceed every index already in use.
    pub fn add_vertex_with_seq(&mut self, id: VertexId, pose: Pose2, seq: u64) -> Result<&Vertex> {
        if seq < self.next_seq {
            return Err(Error::InvalidArgument(format!(
                "vertex {id}: seq {seq} is not after the latest seq {}",
                self.next_seq.saturating_sub(1)
            )));
        }
        if self.vertices.contains_key(&id) {
            return Err(Error::DuplicateVertex(id));
        }
        self.next_seq = seq;
        self.add_vertex(id, pose)
    }

    /// Inserts an edge and returns its id. Odometry edges must keep the chain
    /// a set of simple paths.
    pub fn add_edge(&mut self, mut edge: Edge) -> Result<EdgeId> {
        if edge.from == edge.to {
            return Err(Error::SelfLoop(edge.from));
        }
        for v in [edge.from, edge.to] {
            if !self.vertices.contains_key(&v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        if edge.kind == EdgeKind::Odometry {
            if let Some(existing) = self.odometry_out.get(&edge.from) {
                return Err(Error::OdometryChain(format!(
                    "vertex {} already has outgoing odometry edge {existing}",
                    edge.from
                )));
            }
            if let Some(existing) = self.odometry_in.get(&edge.to) {
                return Err(Error::OdometryChain(format!(
                    "vertex {} already has incoming odometry edge {existing}",
                    edge.to
                )));
            }
            if self.chain_head(edge.from) == edge.to {
                return Err(Error::OdometryChain(format!(
                    "edge {} -> {} would close an odometry cycle",
                    edge.from, edge.to
                )));
            }
        }
        let id = EdgeId(self.next_edge);
        self.next_edge += 1;
        edge.id = id;
        self.adjacency.entry(edge.from).or_default().insert(id);
        self.adjacency.entry(edge.to).or_default().insert(id);
        if edge.kind == EdgeKind::Odometry {
            self.odometry_out.insert(edge.from, id);
            self.odometry_in.insert(edge.to, id);
        }
        self.edges.insert(id, edge);
        Ok(id)
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Result<Edge> {
        let edge = self.edges.remove(&id).ok_or(Error::UnknownEdge(id))?;
        for v in [edge.from, edge.to] {
            if let Some(adj) = self.adjacency.get_mut(&v) {
                adj.remove(&id);
            }
        }
        if edge.kind == EdgeKind::Odometry {
            self.odometry_out.remove(&edge.from);
            self.odometry_in.remove(&edge.to);
        }
        Ok(edge)
    }

    /// Removes a vertex together with every edge touching it.
    pub fn remove_vertex(&mut self, id: VertexId) -> Result<(Vertex, Vec<Edge>)> {
        let incident: Vec<EdgeId> = self
            .adjacency
            .get(&id)
            .ok_or(Error::UnknownVertex(id))?
            .iter()
            .copied()
            .collect();
        let edges = incident
            .into_iter()
            .map(|e| self.remove_edge(e))
            .collect::<Result<Vec<_>>>()?;
        self.adjacency.remove(&id);
        let vertex = self.vertices.remove(&id).ok_or(Error::UnknownVertex(id))?;
        if self.gauge == Some(id) {
            self.gauge = None;
        }
        Ok((vertex, edges))
    }

    pub fn vertex(&self, id: VertexId) -> Option<&Vertex> {
        self.vertices.get(&id)
    }

    pub fn vertex_mut(&mut self, id: VertexId) -> Option<&mut Vertex> {
        self.vertices.get_mut(&id)
    }

    pub fn pose(&self, id: VertexId) -> Option<Pose2> {
        self.vertices.get(&id).map(|v| v.pose)
    }

    pub fn set_pose(&mut self, id: VertexId, pose: Pose2) -> Result<()> {
        let v = self.vertices.get_mut(&id).ok_or(Error::UnknownVertex(id))?;
        v.pose = pose;
        Ok(())
    }

    pub fn contains_vertex(&self, id: VertexId) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    /// Vertices in ascending id order.
    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> + '_ {
        self.vertices.values()
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.keys().copied()
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.values()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge ids touching `v`, ascending.
    pub fn incident(&self, v: VertexId) -> impl Iterator<Item = EdgeId> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency.get(&v).map_or(0, BTreeSet::len)
    }

    /// Edges between `a` and `b` in either direction, ascending by id.
    pub fn edges_between(&self, a: VertexId, b: VertexId) -> Vec<EdgeId> {
        let (small, other) = if self.degree(a) <= self.degree(b) { (a, b) } else { (b, a) };
        self.incident(small)
            .filter(|e| self.edges[e].other(small) == other)
            .collect()
    }

    pub fn odometry_in(&self, v: VertexId) -> Option<EdgeId> {
        self.odometry_in.get(&v).copied()
    }

    pub fn odometry_out(&self, v: VertexId) -> Option<EdgeId> {
        self.odometry_out.get(&v).copied()
    }

    /// First vertex of the odometry chain containing `v`.
    pub fn chain_head(&self, v: VertexId) -> VertexId {
        let mut cur = v;
        while let Some(e) = self.odometry_in.get(&cur) {
            cur = self.edges[e].from;
            if cur == v {
                break;
            }
        }
        cur
    }

    /// A vertex that starts or ends an odometry chain (or is on none).
    pub fn is_session_boundary(&self, v: VertexId) -> bool {
        self.odometry_in(v).is_none() || self.odometry_out(v).is_none()
    }

    /// The fixed vertex: the explicitly set one, or else the earliest inserted.
    pub fn gauge(&self) -> Option<VertexId> {
        self.gauge
            .filter(|g| self.vertices.contains_key(g))
            .or_else(|| self.vertices.values().min_by_key(|v| v.seq).map(|v| v.id))
    }

    pub fn explicit_gauge(&self) -> Option<VertexId> {
        self.gauge
    }

    pub fn set_gauge(&mut self, id: VertexId) -> Result<()> {
        if !self.vertices.contains_key(&id) {
            return Err(Error::UnknownVertex(id));
        }
        self.gauge = Some(id);
        Ok(())
    }

    /// True for empty and single-vertex graphs.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.vertices.keys().next().copied() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for e in self.incident(v) {
                let n = self.edges[&e].other(v);
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.len() == self.vertices.len()
    }

    pub fn count_corrupted_loop_closures(&self) -> usize {
        self.edges
            .values()
            .filter(|e| e.is_loop_closure() && e.provenance == Provenance::Corrupted)
            .count()
    }

    pub fn loop_closure_count(&self) -> usize {
        self.edges.values().filter(|e| e.is_loop_closure()).count()
    }

    /// Replaces the stored measurement data of an edge, keeping its id and
    /// endpoints.
    pub(crate) fn edge_mut(&mut self, id: EdgeId) -> Option<&mut Edge> {
        self.edges.get_mut(&id)
    }

    /// Checks the structural invariants; used by tests and after pruning.
    pub fn validate(&self) -> Result<()> {
        let mut seqs = BTreeSet::new();
        for v in self.vertices.values() {
            if !seqs.insert(v.seq) {
                return Err(Error::InvalidArgument(format!("duplicate seq {}", v.seq)));
            }
        }
        let mut odometry_pairs = BTreeSet::new();
        for e in self.edges.values() {
            if e.from == e.to {
                return Err(Error::SelfLoop(e.from));
            }
            for v in [e.from, e.to] {
                if !self.vertices.contains_key(&v) {
                    return Err(Error::UnknownVertex(v));
                }
            }
            if e.is_odometry() && !odometry_pairs.insert((e.from, e.to)) {
                return Err(Error::OdometryChain(format!("duplicate odometry {}->{}", e.from, e.to)));
            }
        }
        for v in self.vertices.keys() {
            let outgoing = self.incident(*v).filter(|e| {
                let e = &self.edges[e];
                e.is_odometry() && e.from == *v
            });
            if outgoing.count() > 1 {
                return Err(Error::OdometryChain(format!("vertex {v} branches")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::information::InformationMatrix;

    fn chain(n: u64) -> PoseGraph {
        let mut g = PoseGraph::new();
        for i in 0..n {
            g.add_vertex(VertexId(i), Pose2::new(i as f64, 0.0, 0.0)).unwrap();
        }
        for i in 1..n {
            g.add_edge(Edge::odometry(
                VertexId(i - 1),
                VertexId(i),
                Pose2::new(1.0, 0.0, 0.0),
                InformationMatrix::identity(),
            ))
            .unwrap();
        }
        g
    }

    #[test]
    fn odometry_chain_rejects_branches_and_cycles() {
        let mut g = chain(3);
        let e = |a, b| {
            Edge::odometry(VertexId(a), VertexId(b), Pose2::identity(), InformationMatrix::identity())
        };
        assert!(matches!(g.add_edge(e(0, 2)), Err(Error::OdometryChain(_))));
        assert!(matches!(g.add_edge(e(2, 0)), Err(Error::OdometryChain(_))));
        assert!(matches!(g.add_edge(e(1, 1)), Err(Error::SelfLoop(_))));
        assert!(matches!(g.add_edge(e(2, 9)), Err(Error::UnknownVertex(_))));
        g.validate().unwrap();
    }

    #[test]
    fn removing_a_vertex_drops_its_edges() {
        let mut g = chain(4);
        let (_, removed) = g.remove_vertex(VertexId(1)).unwrap();
        assert_eq!(removed.len(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!(!g.is_connected());
        assert!(g.odometry_out(VertexId(0)).is_none());
    }

    #[test]
    fn gauge_defaults_to_first_inserted() {
        let mut g = PoseGraph::new();
        g.add_vertex(VertexId(5), Pose2::identity()).unwrap();
        g.add_vertex(VertexId(2), Pose2::identity()).unwrap();
        assert_eq!(g.gauge(), Some(VertexId(5)));
        g.set_gauge(VertexId(2)).unwrap();
        assert_eq!(g.gauge(), Some(VertexId(2)));
    }

    #[test]
    fn session_boundaries_are_chain_ends() {
        let g = chain(3);
        assert!(g.is_session_boundary(VertexId(0)));
        assert!(!g.is_session_boundary(VertexId(1)));
        assert!(g.is_session_boundary(VertexId(2)));
        assert_eq!(g.chain_head(VertexId(2)), VertexId(0));
    }
}
