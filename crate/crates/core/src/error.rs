use thiserror::Error;

use crate::graph::{EdgeId, VertexId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("information matrix is not symmetric")]
    NotSymmetric,
    #[error("information matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("covariance is numerically singular: {0}")]
    SingularCovariance(String),
    #[error("cannot compose edges: {first} ends at {end} but {second} starts at {start}")]
    EndpointMismatch {
        first: EdgeId,
        second: EdgeId,
        end: VertexId,
        start: VertexId,
    },
    #[error("edges connect different vertex pairs")]
    DifferentVertexPair,
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("vertex {0} already exists")]
    DuplicateVertex(VertexId),
    #[error("edge from {0} to itself")]
    SelfLoop(VertexId),
    #[error("odometry chain violation: {0}")]
    OdometryChain(String),
    #[error("vertex {0} is not on an odometry chain")]
    NotOnOdometryChain(VertexId),
    #[error("graph is not connected")]
    Disconnected,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("normal equations are singular: {0}")]
    SingularSystem(String),
    #[error("gauge vertex {0} is not in the graph")]
    MissingGauge(VertexId),
    #[error("stream lengths differ: {0} estimates vs {1} references")]
    LengthMismatch(usize, usize),
    #[error("no reference pose for vertices {0:?}")]
    MissingReference(Vec<VertexId>),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
