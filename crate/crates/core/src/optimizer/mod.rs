//! Levenberg–Marquardt over SE(2) pose graphs.
//!
//! Each edge contributes the residual
//! `r = vec(x_from⁻¹ ⊕ x_to) − vec(z)` with the heading component wrapped,
//! i.e. the disagreement between predicted and measured relative pose
//! expressed in the `from` frame. This is the frame in which edge
//! covariances are defined throughout the crate.

mod linear;

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::edge::Edge;
use crate::error::{Error, Result};
use crate::graph::{PoseGraph, VertexId};
use crate::pose::{normalize_angle, Pose2};

pub use linear::SparseCholesky;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum RobustKernel {
    #[default]
    None,
    Huber {
        delta: f64,
    },
}

impl RobustKernel {
    /// Kernelized cost of a squared Mahalanobis error `s`.
    pub fn rho(&self, s: f64) -> f64 {
        match *self {
            RobustKernel::None => s,
            RobustKernel::Huber { delta } => {
                if s <= delta * delta {
                    s
                } else {
                    2.0 * delta * s.sqrt() - delta * delta
                }
            }
        }
    }

    /// `ρ'(s)`, used to reweight the edge's information.
    pub fn weight(&self, s: f64) -> f64 {
        match *self {
            RobustKernel::None => 1.0,
            RobustKernel::Huber { delta } => {
                if s <= delta * delta {
                    1.0
                } else {
                    delta / s.sqrt()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers chi² by less than this fraction.
    pub relative_tolerance: f64,
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    pub kernel: RobustKernel,
    /// Fixed vertex; defaults to the graph's gauge.
    pub gauge: Option<VertexId>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_tolerance: 1e-9,
            initial_lambda: 1e-4,
            lambda_factor: 10.0,
            kernel: RobustKernel::None,
            gauge: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_kernel(mut self, kernel: RobustKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.lambda_factor > 1.0) || !(self.initial_lambda > 0.0) {
            return Err(Error::InvalidArgument("damping must be positive and grow by a factor > 1".into()));
        }
        if let RobustKernel::Huber { delta } = self.kernel {
            if !(delta > 0.0) {
                return Err(Error::InvalidArgument("Huber delta must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeStats {
    /// chi² of the initial guess followed by every accepted iterate.
    pub chi2_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl OptimizeStats {
    pub fn final_chi2(&self) -> f64 {
        *self.chi2_trace.last().unwrap_or(&0.0)
    }
}

/// Residual of `edge` given the poses of its endpoints.
pub fn edge_residual(edge: &Edge, from: &Pose2, to: &Pose2) -> Vector3<f64> {
    let (c, s) = (from.theta.cos(), from.theta.sin());
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let z = &edge.measurement;
    Vector3::new(
        c * dx + s * dy - z.x,
        -s * dx + c * dy - z.y,
        normalize_angle(to.theta - from.theta - z.theta),
    )
}

/// Jacobians of [`edge_residual`] with respect to additive perturbations of
/// the `from` and `to` pose vectors.
pub fn residual_jacobians(from: &Pose2, to: &Pose2) -> (Matrix3<f64>, Matrix3<f64>) {
    let (c, s) = (from.theta.cos(), from.theta.sin());
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let ji = Matrix3::new(
        -c, -s, -s * dx + c * dy, //
        s, -c, -c * dx - s * dy, //
        0.0, 0.0, -1.0,
    );
    let jj = Matrix3::new(
        c, s, 0.0, //
        -s, c, 0.0, //
        0.0, 0.0, 1.0,
    );
    (ji, jj)
}

/// Squared Mahalanobis error of one edge against the graph's current poses.
pub fn edge_chi2(graph: &PoseGraph, edge: &Edge) -> f64 {
    let r = edge_residual(edge, &graph.pose(edge.from).unwrap(), &graph.pose(edge.to).unwrap());
    (r.transpose() * edge.info.matrix() * r)[0]
}

/// Total kernelized error of the graph.
pub fn chi2(graph: &PoseGraph, kernel: RobustKernel) -> f64 {
    graph.edges().map(|e| kernel.rho(edge_chi2(graph, e))).sum()
}

struct Problem {
    order: Vec<VertexId>,
    edges: Vec<(Option<usize>, Option<usize>, Edge)>,
}

impl Problem {
    fn new(graph: &PoseGraph, gauge: VertexId) -> Self {
        let order: Vec<VertexId> = graph.vertex_ids().filter(|&v| v != gauge).collect();
        let index: HashMap<VertexId, usize> = order.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let edges = graph
            .edges()
            .map(|e| (index.get(&e.from).copied(), index.get(&e.to).copied(), e.clone()))
            .collect();
        Self { order, edges }
    }

    fn dim(&self) -> usize {
        3 * self.order.len()
    }

    fn cost(&self, poses: &HashMap<VertexId, Pose2>, kernel: RobustKernel) -> f64 {
        self.edges
            .iter()
            .map(|(_, _, e)| {
                let r = edge_residual(e, &poses[&e.from], &poses[&e.to]);
                kernel.rho((r.transpose() * e.info.matrix() * r)[0])
            })
            .sum()
    }

    /// Gauss–Newton blocks of `H` and the gradient `g`. Every structural
    /// block is emitted, even when zero, so the sparsity pattern never changes
    /// between iterations.
    fn linearize(&self, poses: &HashMap<VertexId, Pose2>, kernel: RobustKernel) -> (Vec<(usize, usize, Matrix3<f64>)>, Vec<f64>) {
        let mut blocks = Vec::with_capacity(self.order.len() + 4 * self.edges.len());
        for k in 0..self.order.len() {
            blocks.push((k, k, Matrix3::zeros()));
        }
        let mut grad = vec![0.0; self.dim()];
        for (bi, bj, e) in &self.edges {
            let (xi, xj) = (&poses[&e.from], &poses[&e.to]);
            let r = edge_residual(e, xi, xj);
            let info = e.info.matrix();
            let s = (r.transpose() * info * r)[0];
            let w_info = info * kernel.weight(s);
            let (ji, jj) = residual_jacobians(xi, xj);
            let wr = w_info * r;
            let mut add_grad = |b: usize, j: &Matrix3<f64>| {
                let g = j.transpose() * wr;
                for d in 0..3 {
                    grad[3 * b + d] += g[d];
                }
            };
            if let Some(a) = bi {
                add_grad(*a, &ji);
                blocks.push((*a, *a, ji.transpose() * w_info * ji));
            }
            if let Some(b) = bj {
                add_grad(*b, &jj);
                blocks.push((*b, *b, jj.transpose() * w_info * jj));
            }
            if let (Some(a), Some(b)) = (bi, bj) {
                let hab = ji.transpose() * w_info * jj;
                blocks.push((*a, *b, hab));
                blocks.push((*b, *a, hab.transpose()));
            }
        }
        (blocks, grad)
    }
}

fn damped_triplets(blocks: &[(usize, usize, Matrix3<f64>)], dim: usize, lambda: f64) -> Vec<(usize, usize, f64)> {
    let mut diag = vec![0.0; dim];
    for (a, b, m) in blocks {
        if a == b {
            for d in 0..3 {
                diag[3 * a + d] += m[(d, d)];
            }
        }
    }
    let mut out = Vec::with_capacity(9 * blocks.len() + dim);
    for (a, b, m) in blocks {
        for r in 0..3 {
            for c in 0..3 {
                out.push((3 * a + r, 3 * b + c, m[(r, c)]));
            }
        }
    }
    for (i, d) in diag.iter().enumerate() {
        out.push((i, i, lambda * d.max(1e-12)));
    }
    out
}

/// Moves the graph's poses to a local minimum of [`chi2`]. The gauge vertex
/// stays fixed. If the iteration budget runs out, the best iterate is kept
/// and `converged` is false.
pub fn optimize(graph: &mut PoseGraph, cfg: &OptimizerConfig) -> Result<OptimizeStats> {
    cfg.validate()?;
    let mut stats = OptimizeStats {
        chi2_trace: Vec::new(),
        iterations: 0,
        converged: false,
    };
    if graph.is_empty() {
        stats.converged = true;
        stats.chi2_trace.push(0.0);
        return Ok(stats);
    }
    let gauge = match cfg.gauge {
        Some(g) if graph.contains_vertex(g) => g,
        Some(g) => return Err(Error::MissingGauge(g)),
        None => graph.gauge().expect("non-empty graph has a gauge"),
    };
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let problem = Problem::new(graph, gauge);
    let mut poses: HashMap<VertexId, Pose2> = graph.vertices().map(|v| (v.id, v.pose)).collect();
    let mut cost = problem.cost(&poses, cfg.kernel);
    stats.chi2_trace.push(cost);
    if problem.dim() == 0 || cost == 0.0 {
        stats.converged = true;
        return Ok(stats);
    }

    let mut solver = SparseCholesky::new(problem.dim());
    let mut lambda = cfg.initial_lambda;
    'outer: while stats.iterations < cfg.max_iterations {
        stats.iterations += 1;
        let (blocks, grad) = problem.linearize(&poses, cfg.kernel);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        loop {
            let triplets = damped_triplets(&blocks, problem.dim(), lambda);
            let step = solver.solve(&triplets, &rhs)?;
            let mut trial = poses.clone();
            for (k, v) in problem.order.iter().enumerate() {
                let d = Vector3::new(step[3 * k], step[3 * k + 1], step[3 * k + 2]);
                trial.insert(*v, poses[v].retract(&d));
            }
            let trial_cost = problem.cost(&trial, cfg.kernel);
            if trial_cost.is_finite() && trial_cost < cost {
                let decrease = (cost - trial_cost) / cost;
                poses = trial;
                cost = trial_cost;
                stats.chi2_trace.push(cost);
                lambda = (lambda / cfg.lambda_factor).max(1e-12);
                if decrease < cfg.relative_tolerance || cost == 0.0 {
                    stats.converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= cfg.lambda_factor;
            if lambda > 1e12 {
                // No descent direction left at working precision.
                stats.converged = true;
                break 'outer;
            }
        }
    }

    for (v, p) in poses {
        graph.set_pose(v, p)?;
    }
    Ok(stats)
}
