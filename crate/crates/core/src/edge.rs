//! Relative-pose constraints and the three elementary edge operations used by
//! marginalization: inversion, composition and combination.
//!
//! Covariances are propagated to first order. Measurement noise is additive on
//! the `(x, y, theta)` vector of the measurement, i.e. expressed in the frame
//! of the edge's `from` vertex.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, VertexId};
use crate::information::InformationMatrix;
use crate::pose::{compose_jacobians, inverse_jacobian, Pose2};

/// χ²(3) 0.999 quantile.
pub const DEFAULT_MAHALANOBIS_GATE: f64 = 16.266_236_196_238_13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Odometry,
    LoopClosure,
}

/// Synthetic bookkeeping: whether an edge descends from a corrupted measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Provenance {
    #[default]
    Genuine,
    Corrupted,
}

impl Provenance {
    pub fn merge(self, other: Provenance) -> Provenance {
        if self == Provenance::Corrupted || other == Provenance::Corrupted {
            Provenance::Corrupted
        } else {
            Provenance::Genuine
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Id inside the owning graph; `EdgeId::UNASSIGNED` for free-standing edges.
    pub id: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    /// Pose of `to` expressed in the frame of `from`.
    pub measurement: Pose2,
    pub info: InformationMatrix,
    pub kind: EdgeKind,
    pub provenance: Provenance,
}

/// Outcome of fusing two constraints on the same vertex pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Combination {
    Fused(Edge),
    /// The inputs contradict; the odometry edge is returned and the loop
    /// closure discarded.
    KeepOdometryDropLoop(Edge),
    /// Two contradicting loop closures; neither survives.
    DropBoth,
}

impl Edge {
    pub fn new(
        from: VertexId,
        to: VertexId,
        measurement: Pose2,
        info: InformationMatrix,
        kind: EdgeKind,
    ) -> Self {
        Self {
            id: EdgeId::UNASSIGNED,
            from,
            to,
            measurement,
            info,
            kind,
            provenance: Provenance::Genuine,
        }
    }

    pub fn odometry(from: VertexId, to: VertexId, measurement: Pose2, info: InformationMatrix) -> Self {
        Self::new(from, to, measurement, info, EdgeKind::Odometry)
    }

    pub fn loop_closure(
        from: VertexId,
        to: VertexId,
        measurement: Pose2,
        info: InformationMatrix,
    ) -> Self {
        Self::new(from, to, measurement, info, EdgeKind::LoopClosure)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn is_odometry(&self) -> bool {
        self.kind == EdgeKind::Odometry
    }

    pub fn is_loop_closure(&self) -> bool {
        self.kind == EdgeKind::LoopClosure
    }

    pub fn is_corrupted(&self) -> bool {
        self.provenance == Provenance::Corrupted
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.from == v || self.to == v
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.from == v {
            self.to
        } else {
            self.from
        }
    }

    pub fn same_pair(&self, other: &Edge) -> bool {
        (self.from == other.from && self.to == other.to)
            || (self.from == other.to && self.to == other.from)
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        self.info.covariance()
    }

    /// Reverses the edge. Endpoints swap, the measurement is inverted and the
    /// covariance is pushed through the inversion Jacobian.
    pub fn invert(&self) -> Result<Edge> {
        let j = inverse_jacobian(&self.measurement);
        let cov = j * self.covariance() * j.transpose();
        Ok(Edge {
            id: EdgeId::UNASSIGNED,
            from: self.to,
            to: self.from,
            measurement: self.measurement.inverse(),
            info: InformationMatrix::from_covariance(&cov)?,
            kind: self.kind,
            provenance: self.provenance,
        })
    }

    /// Returns this edge oriented so that it starts at `from`.
    pub fn oriented_from(&self, from: VertexId) -> Result<Edge> {
        if self.from == from {
            Ok(Edge {
                id: EdgeId::UNASSIGNED,
                ..self.clone()
            })
        } else if self.to == from {
            self.invert()
        } else {
            Err(Error::InvalidArgument(format!(
                "edge {}->{} does not touch {from}",
                self.from, self.to
            )))
        }
    }

    /// Chains `self: a -> b` with `next: b -> c` into `a -> c`.
    pub fn compose(&self, next: &Edge) -> Result<Edge> {
        if self.to != next.from {
            return Err(Error::EndpointMismatch {
                first: self.id,
                second: next.id,
                end: self.to,
                start: next.from,
            });
        }
        if self.from == next.to {
            return Err(Error::SelfLoop(self.from));
        }
        let (j1, j2) = compose_jacobians(&self.measurement, &next.measurement);
        let cov = j1 * self.covariance() * j1.transpose() + j2 * next.covariance() * j2.transpose();
        let kind = if self.is_loop_closure() || next.is_loop_closure() {
            EdgeKind::LoopClosure
        } else {
            EdgeKind::Odometry
        };
        Ok(Edge {
            id: EdgeId::UNASSIGNED,
            from: self.from,
            to: next.to,
            measurement: self.measurement.compose(&next.measurement),
            info: InformationMatrix::from_covariance(&cov)?,
            kind,
            provenance: self.provenance.merge(next.provenance),
        })
    }
}

/// `dᵀ(Σ₁+Σ₂)⁻¹d` for two edges on the same vertex pair, where `d` is the
/// measurement difference with the angle wrapped. `other` is reoriented to
/// match `reference` when needed.
pub fn mahalanobis_gap(reference: &Edge, other: &Edge) -> Result<f64> {
    let other = align(reference, other)?;
    gap_aligned(reference, &other)
}

fn align(reference: &Edge, other: &Edge) -> Result<Edge> {
    if !reference.same_pair(other) {
        return Err(Error::DifferentVertexPair);
    }
    other.oriented_from(reference.from)
}

fn gap_aligned(a: &Edge, b: &Edge) -> Result<f64> {
    let d = b.measurement.difference(&a.measurement);
    let sum = a.covariance() + b.covariance();
    let chol = sum
        .cholesky()
        .ok_or_else(|| Error::SingularCovariance("combined covariance is singular".into()))?;
    Ok(d.dot(&chol.solve(&d)).max(0.0))
}

/// Information-weighted fusion of two edges on the same vertex pair, without
/// any consistency check. The result is oriented like the odometry input if
/// there is one, otherwise like `first`. The fused mean is a single Gauss step
/// linearized at that orientation's measurement.
pub fn fuse(first: &Edge, second: &Edge) -> Result<Edge> {
    let (reference, other) = if second.is_odometry() && !first.is_odometry() {
        (second, align(second, first)?)
    } else {
        (first, align(first, second)?)
    };
    fuse_aligned(reference, &other)
}

fn fuse_aligned(reference: &Edge, other: &Edge) -> Result<Edge> {
    let info = reference.info + other.info;
    let d = other.measurement.difference(&reference.measurement);
    let step = info
        .matrix()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .solve(&(other.info.matrix() * d));
    let kind = if reference.is_odometry() || other.is_odometry() {
        EdgeKind::Odometry
    } else {
        EdgeKind::LoopClosure
    };
    Ok(Edge {
        id: EdgeId::UNASSIGNED,
        from: reference.from,
        to: reference.to,
        measurement: reference.measurement.retract(&step),
        info: InformationMatrix::new(*info.matrix())?,
        kind,
        provenance: reference.provenance.merge(other.provenance),
    })
}

/// Fuses two edges on the same pair unless their Mahalanobis gap exceeds
/// `gate`. Contradictions resolve in favour of odometry; two contradicting
/// loop closures are both dropped.
pub fn combine(first: &Edge, second: &Edge, gate: f64) -> Result<Combination> {
    let (reference, other) = if second.is_odometry() && !first.is_odometry() {
        (second, align(second, first)?)
    } else {
        (first, align(first, second)?)
    };
    let gap = gap_aligned(reference, &other)?;
    if gap <= gate {
        return fuse_aligned(reference, &other).map(Combination::Fused);
    }
    Ok(match (reference.kind, other.kind) {
        (EdgeKind::LoopClosure, EdgeKind::LoopClosure) => Combination::DropBoth,
        (EdgeKind::Odometry, EdgeKind::LoopClosure) => {
            Combination::KeepOdometryDropLoop(Edge {
                id: EdgeId::UNASSIGNED,
                ..reference.clone()
            })
        }
        // Two odometry edges on one pair cannot both come from a simple chain;
        // trust them both.
        _ => Combination::Fused(fuse_aligned(reference, &other)?),
    })
}
