//! Audit trail of a pruning pass.
//!
//! The text form has one action per line:
//!
//! ```text
//! MARGINALIZE <vertex> <sid|chow_liu> <density> <gate> <vertices_before> <edges_before> <vertices_after> <edges_after>
//! VERDICT <a> <b> <keep_odometry_drop_loop|drop_both> <gap>
//! CLIQUE <vertex> <incident> <corrupted_incident> <neighbors> <candidates> <corrupted_candidates> <retained> <retained_corrupted>
//! REMOVE_EDGE <edge_id> <from> <to> <trace> <path_ratio> <edges_before> <edges_after>
//! EXEMPT <vertex>
//! ```
//!
//! Verdict and clique lines follow the marginalization that produced them.
//! Replaying the marginalizations and edge removals against the input graph
//! reproduces the output graph; the other lines are informational.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, PoseGraph, VertexId};
use crate::pruning::marginalize::{
    marginalize_chow_liu, marginalize_sid, CliqueReport, ContradictionOutcome, Marginalization,
};

#[derive(Debug, Clone, PartialEq)]
pub enum PruneRecord {
    Marginalized {
        vertex: VertexId,
        method: Marginalization,
        density: f64,
        gate: f64,
        vertices_before: usize,
        edges_before: usize,
        vertices_after: usize,
        edges_after: usize,
    },
    Verdict {
        a: VertexId,
        b: VertexId,
        outcome: ContradictionOutcome,
        gap: f64,
    },
    Clique {
        vertex: VertexId,
        report: CliqueReport,
    },
    EdgeRemoved {
        edge: EdgeId,
        from: VertexId,
        to: VertexId,
        trace: f64,
        path_ratio: f64,
        edges_before: usize,
        edges_after: usize,
    },
    Exempt {
        vertex: VertexId,
    },
}

impl fmt::Display for PruneRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneRecord::Marginalized {
                vertex,
                method,
                density,
                gate,
                vertices_before,
                edges_before,
                vertices_after,
                edges_after,
            } => write!(
                f,
                "MARGINALIZE {vertex} {method} {density:?} {gate:?} {vertices_before} {edges_before} {vertices_after} {edges_after}"
            ),
            PruneRecord::Verdict { a, b, outcome, gap } => write!(f, "VERDICT {a} {b} {outcome} {gap:?}"),
            PruneRecord::Clique { vertex, report: r } => write!(
                f,
                "CLIQUE {vertex} {} {} {} {} {} {} {}",
                r.incident_edges,
                r.corrupted_incident,
                r.neighbors,
                r.candidates,
                r.corrupted_candidates,
                r.retained,
                r.retained_corrupted
            ),
            PruneRecord::EdgeRemoved {
                edge,
                from,
                to,
                trace,
                path_ratio,
                edges_before,
                edges_after,
            } => write!(
                f,
                "REMOVE_EDGE {} {from} {to} {trace:?} {path_ratio:?} {edges_before} {edges_after}",
                edge.0
            ),
            PruneRecord::Exempt { vertex } => write!(f, "EXEMPT {vertex}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneLog {
    pub records: Vec<PruneRecord>,
}

impl PruneLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: PruneRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: PruneLog) {
        self.records.extend(other.records);
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn marginalized(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.records.iter().filter_map(|r| match r {
            PruneRecord::Marginalized { vertex, .. } => Some(*vertex),
            _ => None,
        })
    }

    pub fn cliques(&self) -> impl Iterator<Item = &CliqueReport> + '_ {
        self.records.iter().filter_map(|r| match r {
            PruneRecord::Clique { report, .. } => Some(report),
            _ => None,
        })
    }

    pub fn removed_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.records.iter().filter_map(|r| match r {
            PruneRecord::EdgeRemoved { edge, .. } => Some(*edge),
            _ => None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            writeln!(out, "{r}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut log = PruneLog::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(tag) = fields.first() else { continue };
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let num = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .ok_or_else(|| err(format!("missing field {i}")))?
                    .parse()
                    .map_err(|e| err(format!("field {i}: {e}")))
            };
            let int = |i: usize| -> Result<u64> {
                fields
                    .get(i)
                    .ok_or_else(|| err(format!("missing field {i}")))?
                    .parse()
                    .map_err(|e| err(format!("field {i}: {e}")))
            };
            let record = match *tag {
                "MARGINALIZE" => PruneRecord::Marginalized {
                    vertex: VertexId(int(1)?),
                    method: fields
                        .get(2)
                        .ok_or_else(|| err("missing method".into()))?
                        .parse()
                        .map_err(|e: Error| err(e.to_string()))?,
                    density: num(3)?,
                    gate: num(4)?,
                    vertices_before: int(5)? as usize,
                    edges_before: int(6)? as usize,
                    vertices_after: int(7)? as usize,
                    edges_after: int(8)? as usize,
                },
                "VERDICT" => PruneRecord::Verdict {
                    a: VertexId(int(1)?),
                    b: VertexId(int(2)?),
                    outcome: fields
                        .get(3)
                        .ok_or_else(|| err("missing verdict".into()))?
                        .parse()
                        .map_err(|e: Error| err(e.to_string()))?,
                    gap: num(4)?,
                },
                "CLIQUE" => PruneRecord::Clique {
                    vertex: VertexId(int(1)?),
                    report: CliqueReport {
                        incident_edges: int(2)? as usize,
                        corrupted_incident: int(3)? as usize,
                        neighbors: int(4)? as usize,
                        candidates: int(5)? as usize,
                        corrupted_candidates: int(6)? as usize,
                        retained: int(7)? as usize,
                        retained_corrupted: int(8)? as usize,
                    },
                },
                "REMOVE_EDGE" => PruneRecord::EdgeRemoved {
                    edge: EdgeId(int(1)?),
                    from: VertexId(int(2)?),
                    to: VertexId(int(3)?),
                    trace: num(4)?,
                    path_ratio: num(5)?,
                    edges_before: int(6)? as usize,
                    edges_after: int(7)? as usize,
                },
                "EXEMPT" => PruneRecord::Exempt {
                    vertex: VertexId(int(1)?),
                },
                other => return Err(err(format!("unknown record `{other}`"))),
            };
            log.push(record);
        }
        Ok(log)
    }

    /// Re-applies every marginalization and edge removal to `graph`.
    pub fn replay(&self, graph: &mut PoseGraph) -> Result<()> {
        for r in &self.records {
            match r {
                PruneRecord::Marginalized {
                    vertex, method, gate, ..
                } => match method {
                    Marginalization::Sid => {
                        marginalize_sid(graph, *vertex, *gate)?;
                    }
                    Marginalization::ChowLiu => {
                        marginalize_chow_liu(graph, *vertex)?;
                    }
                },
                PruneRecord::EdgeRemoved { edge, from, to, .. } => {
                    let e = graph.edge(*edge).ok_or(Error::UnknownEdge(*edge))?;
                    if (e.from, e.to) != (*from, *to) {
                        return Err(Error::InvalidArgument(format!(
                            "edge {edge} connects {}->{}, log says {from}->{to}",
                            e.from, e.to
                        )));
                    }
                    graph.remove_edge(*edge)?;
                }
                PruneRecord::Verdict { .. } | PruneRecord::Clique { .. } | PruneRecord::Exempt { .. } => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let log = PruneLog {
            records: vec![
                PruneRecord::Marginalized {
                    vertex: VertexId(4),
                    method: Marginalization::Sid,
                    density: 9.123456789012345,
                    gate: 16.26,
                    vertices_before: 10,
                    edges_before: 20,
                    vertices_after: 9,
                    edges_after: 18,
                },
                PruneRecord::Verdict {
                    a: VertexId(3),
                    b: VertexId(5),
                    outcome: ContradictionOutcome::DropBoth,
                    gap: 1e6,
                },
                PruneRecord::EdgeRemoved {
                    edge: EdgeId(17),
                    from: VertexId(1),
                    to: VertexId(8),
                    trace: 3.0,
                    path_ratio: 1.4142135623730951,
                    edges_before: 18,
                    edges_after: 17,
                },
                PruneRecord::Clique {
                    vertex: VertexId(6),
                    report: CliqueReport {
                        incident_edges: 4,
                        corrupted_incident: 1,
                        neighbors: 4,
                        candidates: 6,
                        corrupted_candidates: 3,
                        retained: 3,
                        retained_corrupted: 1,
                    },
                },
                PruneRecord::Exempt { vertex: VertexId(2) },
            ],
        };
        let text = log.to_text();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(PruneLog::parse(&text).unwrap(), log);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = PruneLog::parse("EXEMPT 1\nMARGINALIZE x sid 1 1 1 1 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(PruneLog::parse("BOGUS\n"), Err(Error::Parse { line: 1, .. })));
    }
}
