//! Plain-text graph files in the g2o `VERTEX_SE2` / `EDGE_SE2` dialect,
//! ground-truth sidecars, and run-report export.
//!
//! Extra metadata lives in comment lines so other tools can still read the
//! files:
//!
//! ```text
//! # KIND:LOOP            next edge is a loop closure
//! # KIND:ODOM            next edge is odometry
//! # PROVENANCE:CORRUPTED next edge descends from a wrong measurement
//! # SEQ:17               next vertex's insertion index
//! # PINNED               next vertex is never pruned
//! ```
//!
//! Without a kind tag an edge `i → i+1` is odometry and anything else is a
//! loop closure. Edge ids are reassigned in file order.

use std::fmt::Write as _;

use crate::edge::{Edge, EdgeKind, Provenance};
use crate::error::{Error, Result};
use crate::eval::RunReport;
use crate::graph::{PoseGraph, VertexId};
use crate::information::InformationMatrix;
use crate::pose::Pose2;
use crate::synthetic::GroundTruth;

/// Things the parser tolerated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Records of unknown type that were skipped.
    pub skipped_records: usize,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Fields<'a> {
    line: usize,
    items: Vec<&'a str>,
}

impl Fields<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn expect_len(&self, n: usize) -> Result<()> {
        if self.items.len() != n {
            return Err(self.err(format!("{} expects {} fields, found {}", self.items[0], n - 1, self.items.len() - 1)));
        }
        Ok(())
    }

    fn f64(&self, i: usize) -> Result<f64> {
        let v: f64 = self.items[i]
            .parse()
            .map_err(|_| self.err(format!("field {i} `{}` is not a number", self.items[i])))?;
        if !v.is_finite() {
            return Err(self.err(format!("field {i} is not finite")));
        }
        Ok(v)
    }

    fn id(&self, i: usize) -> Result<VertexId> {
        self.items[i]
            .parse()
            .map(VertexId)
            .map_err(|_| self.err(format!("field {i} `{}` is not a vertex id", self.items[i])))
    }
}

struct PendingVertex {
    id: VertexId,
    pose: Pose2,
    seq: Option<u64>,
    pinned: bool,
    line: usize,
}

pub fn parse_graph(text: &str) -> Result<PoseGraph> {
    parse_graph_with_report(text).map(|(g, _)| g)
}

/// Parses a graph file. Any malformed line is reported with its 1-based line
/// number.
pub fn parse_graph_with_report(text: &str) -> Result<(PoseGraph, ParseReport)> {
    let mut report = ParseReport::default();
    let mut vertices: Vec<PendingVertex> = Vec::new();
    let mut edges: Vec<(usize, Edge, bool)> = Vec::new();
    let mut fixed: Option<(usize, VertexId)> = None;

    let mut kind_tag: Option<EdgeKind> = None;
    let mut corrupted_tag = false;
    let mut seq_tag: Option<u64> = None;
    let mut pinned_tag = false;

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let tag = comment.trim();
            let bad = |m: String| Error::Parse { line, message: m };
            match tag {
                "KIND:LOOP" => kind_tag = Some(EdgeKind::LoopClosure),
                "KIND:ODOM" => kind_tag = Some(EdgeKind::Odometry),
                "PROVENANCE:CORRUPTED" => corrupted_tag = true,
                "PROVENANCE:GENUINE" => corrupted_tag = false,
                "PINNED" => pinned_tag = true,
                _ => {
                    if let Some(v) = tag.strip_prefix("SEQ:") {
                        seq_tag = Some(v.trim().parse().map_err(|_| bad(format!("bad SEQ tag `{v}`")))?);
                    }
                }
            }
            continue;
        }
        let f = Fields {
            line,
            items: trimmed.split_whitespace().collect(),
        };
        match f.items[0] {
            "VERTEX_SE2" => {
                f.expect_len(5)?;
                vertices.push(PendingVertex {
                    id: f.id(1)?,
                    pose: Pose2::new(f.f64(2)?, f.f64(3)?, f.f64(4)?),
                    seq: seq_tag.take(),
                    pinned: std::mem::take(&mut pinned_tag),
                    line,
                });
            }
            "EDGE_SE2" => {
                f.expect_len(12)?;
                let (from, to) = (f.id(1)?, f.id(2)?);
                let z = Pose2::new(f.f64(3)?, f.f64(4)?, f.f64(5)?);
                let mut upper = [0.0; 6];
                for (k, u) in upper.iter_mut().enumerate() {
                    *u = f.f64(6 + k)?;
                }
                let info = InformationMatrix::from_upper_triangle(upper)
                    .map_err(|e| f.err(format!("information matrix: {e}")))?;
                let kind = kind_tag.take().unwrap_or(if to.0 == from.0.wrapping_add(1) {
                    EdgeKind::Odometry
                } else {
                    EdgeKind::LoopClosure
                });
                let provenance = if std::mem::take(&mut corrupted_tag) {
                    Provenance::Corrupted
                } else {
                    Provenance::Genuine
                };
                edges.push((line, Edge::new(from, to, z, info, kind).with_provenance(provenance), false));
            }
            "FIX" => {
                f.expect_len(2)?;
                fixed = Some((line, f.id(1)?));
            }
            _ => report.skipped_records += 1,
        }
    }

    // Insert vertices in insertion order so seq stays monotone.
    let tagged = vertices.iter().any(|v| v.seq.is_some());
    if tagged {
        if let Some(v) = vertices.iter().find(|v| v.seq.is_none()) {
            return Err(Error::Parse {
                line: v.line,
                message: "vertex lacks a SEQ tag while others have one".into(),
            });
        }
        vertices.sort_by_key(|v| v.seq);
    }
    let mut g = PoseGraph::new();
    for v in &vertices {
        let err = |e: Error| Error::Parse {
            line: v.line,
            message: e.to_string(),
        };
        match v.seq {
            Some(seq) => g.add_vertex_with_seq(v.id, v.pose, seq).map_err(err)?,
            None => g.add_vertex(v.id, v.pose).map_err(err)?,
        };
        if v.pinned {
            g.vertex_mut(v.id).unwrap().prunable = false;
        }
    }
    for (line, e, _) in edges {
        for end in [e.from, e.to] {
            if !g.contains_vertex(end) {
                return Err(Error::Parse {
                    line,
                    message: format!("edge references undeclared vertex {end}"),
                });
            }
        }
        g.add_edge(e).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    if let Some((line, id)) = fixed {
        g.set_gauge(id).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    Ok((g, report))
}

/// Writes vertices by ascending id, then `FIX`, then edges by ascending id.
/// Values carry 17 significant digits.
pub fn serialize_graph(g: &PoseGraph) -> String {
    let mut out = String::new();
    // Seq tags are only needed when insertion order differs from id order.
    let needs_seq = g.vertices().enumerate().any(|(k, v)| v.seq != k as u64);
    for v in g.vertices() {
        if needs_seq {
            writeln!(out, "# SEQ:{}", v.seq).unwrap();
        }
        if !v.prunable {
            out.push_str("# PINNED\n");
        }
        let p = v.pose;
        writeln!(out, "VERTEX_SE2 {} {} {} {}", v.id.0, num(p.x), num(p.y), num(p.theta)).unwrap();
    }
    if let Some(gauge) = g.gauge() {
        writeln!(out, "FIX {}", gauge.0).unwrap();
    }
    for e in g.edges() {
        let inferred_odometry = e.to.0 == e.from.0.wrapping_add(1);
        match e.kind {
            EdgeKind::LoopClosure => out.push_str("# KIND:LOOP\n"),
            EdgeKind::Odometry if !inferred_odometry => out.push_str("# KIND:ODOM\n"),
            EdgeKind::Odometry => {}
        }
        if e.is_corrupted() {
            out.push_str("# PROVENANCE:CORRUPTED\n");
        }
        let z = e.measurement;
        let info: Vec<String> = e.info.upper_triangle().iter().map(|v| num(*v)).collect();
        writeln!(
            out,
            "EDGE_SE2 {} {} {} {} {} {}",
            e.from.0,
            e.to.0,
            num(z.x),
            num(z.y),
            num(z.theta),
            info.join(" ")
        )
        .unwrap();
    }
    out
}

/// Ground-truth sidecar: one `VERTEX_SE2` record per pose.
pub fn serialize_ground_truth(truth: &GroundTruth) -> String {
    let mut out = String::new();
    for (id, p) in truth {
        writeln!(out, "VERTEX_SE2 {} {} {} {}", id.0, num(p.x), num(p.y), num(p.theta)).unwrap();
    }
    out
}

pub fn parse_ground_truth(text: &str) -> Result<GroundTruth> {
    let (g, _) = parse_graph_with_report(text)?;
    Ok(g.vertices().map(|v| (v.id, v.pose)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" | "json-lines" => Ok(Self::JsonLines),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

/// One line per run. CSV always starts with a header row.
pub fn export_report(reports: &[RunReport], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(RunReport::FIELDS)?;
            for r in reports {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        ReportFormat::JsonLines => {
            let mut out = String::new();
            for r in reports {
                out.push_str(&serde_json::to_string(r)?);
                out.push('\n');
            }
            Ok(out)
        }
    }
}

pub fn import_report(text: &str, format: ReportFormat) -> Result<Vec<RunReport>> {
    match format {
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            r.deserialize().map(|x| x.map_err(Error::from)).collect()
        }
        ReportFormat::JsonLines => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{corrupt_loop_closures, gen_grid, CorruptionSpec, GridSpec};

    #[test]
    fn minimal_file() {
        let g = parse_graph("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n").unwrap();
        assert_eq!(g.vertex_count(), 2);
        let e = g.edges().next().unwrap();
        assert!(e.is_odometry());
        assert_eq!(e.info, InformationMatrix::identity());
        assert_eq!(e.measurement, Pose2::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn empty_input_and_output() {
        assert!(parse_graph("").unwrap().is_empty());
        assert_eq!(serialize_graph(&PoseGraph::new()), "");
    }

    #[test]
    fn tags_and_gauge() {
        let text = "VERTEX_SE2 5 0 0 0\nVERTEX_SE2 6 1 0 0\nVERTEX_SE2 9 1 1 0\nFIX 6\n\
                    EDGE_SE2 5 6 1 0 0 1 0 0 1 0 1\n# KIND:LOOP\n# PROVENANCE:CORRUPTED\nEDGE_SE2 6 9 0 1 0 1 0 0 1 0 1\n\
                    # KIND:ODOM\nEDGE_SE2 6 9 0 1 0 1 0 0 1 0 1\nEDGE_SE2 5 9 1 1 0 1 0 0 1 0 1\nTAG_UNKNOWN 1 2\n";
        let (g, report) = parse_graph_with_report(text).unwrap();
        assert_eq!(report.skipped_records, 1);
        assert_eq!(g.gauge(), Some(VertexId(6)));
        let kinds: Vec<(bool, bool)> = g.edges().map(|e| (e.is_odometry(), e.is_corrupted())).collect();
        assert_eq!(kinds, vec![(true, false), (false, true), (true, false), (false, false)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 x 0 0\n", 2),
            ("VERTEX_SE2 0 0 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n", 2),
            ("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 0 0 0\n\nEDGE_SE2 0 1 1 0 0 1 0 0 -1 0 1\n", 4),
            ("VERTEX_SE2 0 0 0\n", 1),
            ("FIX 3\n", 1),
        ];
        for (text, line) in cases {
            match parse_graph(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn grid_round_trip_is_exact_and_a_fixpoint() {
        let grid = GridSpec::new(30, 30, 1.0);
        let (mut g, _) = gen_grid(&grid).unwrap();
        corrupt_loop_closures(&mut g, &CorruptionSpec::for_grid(0.1, 3, &grid)).unwrap();
        let text = serialize_graph(&g);
        let back = parse_graph(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(serialize_graph(&back), text);
    }

    #[test]
    fn vertices_are_written_by_id() {
        let mut g = PoseGraph::new();
        for id in [7u64, 2, 5] {
            g.add_vertex(VertexId(id), Pose2::identity()).unwrap();
        }
        let text = serialize_graph(&g);
        let ids: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("VERTEX_SE2"))
            .map(|l| l.split_whitespace().nth(1).unwrap())
            .collect();
        assert_eq!(ids, ["2", "5", "7"]);
        let back = parse_graph(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.gauge(), Some(VertexId(7)));
    }

    #[test]
    fn ground_truth_round_trip() {
        let (_, truth) = gen_grid(&GridSpec::new(4, 5, 0.3)).unwrap();
        assert_eq!(parse_ground_truth(&serialize_ground_truth(&truth)).unwrap(), truth);
    }
}
