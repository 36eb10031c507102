//! Synthetic pose graphs: lawnmower grids, random walks, repeated traversals,
//! measurement noise and outlier loop closures.
//!
//! Every generator is a pure function of its spec and seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::density::PointSet;
use crate::edge::{Edge, Provenance};
use crate::error::{Error, Result};
use crate::graph::{PoseGraph, VertexId};
use crate::information::InformationMatrix;
use crate::pose::Pose2;

/// Ground-truth poses keyed by vertex id.
pub type GroundTruth = BTreeMap<VertexId, Pose2>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    /// Loop closures join vertices closer than `spacing * radius_factor`.
    pub radius_factor: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, spacing: f64) -> Self {
        Self {
            rows,
            cols,
            spacing,
            radius_factor: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 rows and 2 columns".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        if !(self.radius_factor > 0.0) {
            return Err(Error::InvalidArgument("loop-closure radius factor must be positive".into()));
        }
        Ok(())
    }

    /// Position of the `k`-th vertex along the lawnmower path.
    pub fn position(&self, k: usize) -> [f64; 2] {
        let row = k / self.cols;
        let col = if row % 2 == 0 { k % self.cols } else { self.cols - 1 - k % self.cols };
        [col as f64 * self.spacing, row as f64 * self.spacing]
    }
}

/// Gives each position the heading toward its successor (the last one keeps
/// its predecessor's).
fn headings(points: &[[f64; 2]]) -> Vec<Pose2> {
    let mut out = Vec::with_capacity(points.len());
    let mut last = 0.0;
    for (k, p) in points.iter().enumerate() {
        if let Some(n) = points.get(k + 1) {
            last = (n[1] - p[1]).atan2(n[0] - p[0]);
        }
        out.push(Pose2::new(p[0], p[1], last));
    }
    out
}

/// Default information for exact synthetic odometry and loop closures,
/// matching [`NoiseSpec::default`].
fn default_infos() -> (InformationMatrix, InformationMatrix) {
    let n = NoiseSpec::default();
    (n.odometry_information().unwrap(), n.loop_information().unwrap())
}

/// Builds a graph over `poses` (ids `0..`) chained by odometry, with
/// exact loop closures between non-consecutive vertices closer than `radius`.
fn chain_with_loops(poses: &[Pose2], radius: f64) -> Result<(PoseGraph, GroundTruth)> {
    let (odo, lc) = default_infos();
    let mut g = PoseGraph::new();
    let mut truth = GroundTruth::new();
    for (k, p) in poses.iter().enumerate() {
        let id = VertexId(k as u64);
        g.add_vertex(id, *p)?;
        truth.insert(id, *p);
    }
    for k in 1..poses.len() {
        let m = poses[k - 1].between(&poses[k]);
        g.add_edge(Edge::odometry(VertexId(k as u64 - 1), VertexId(k as u64), m, odo))?;
    }
    let points = PointSet::new(poses.iter().map(|p| p.position()).collect())?;
    for i in 0..poses.len() {
        for j in points.within_radius(i, radius) {
            if j > i + 1 {
                let m = poses[i].between(&poses[j]);
                g.add_edge(Edge::loop_closure(VertexId(i as u64), VertexId(j as u64), m, lc))?;
            }
        }
    }
    Ok((g, truth))
}

/// A grid traversed row by row in alternating directions, with exact
/// measurements.
pub fn gen_grid(spec: &GridSpec) -> Result<(PoseGraph, GroundTruth)> {
    spec.validate()?;
    let points: Vec<[f64; 2]> = (0..spec.rows * spec.cols).map(|k| spec.position(k)).collect();
    // Nudge the radius so pairs at exactly the limit are included despite rounding.
    chain_with_loops(&headings(&points), spec.spacing * spec.radius_factor * (1.0 + 1e-9))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub steps: usize,
    /// `[x_min, y_min, x_max, y_max]`.
    pub bounds: [f64; 4],
    pub step_length: f64,
    /// Largest heading change per step, radians.
    pub max_turn: f64,
    pub loop_radius: f64,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            bounds: [0.0, 0.0, 20.0, 20.0],
            step_length: 0.5,
            max_turn: 0.4,
            loop_radius: 0.75,
            seed,
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let [x0, y0, x1, y1] = self.bounds;
        p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
    }
}

/// A smooth random walk that stays inside the bounds, with loop closures
/// between nearby non-consecutive poses.
pub fn gen_random_trajectory(spec: &TrajectorySpec) -> Result<(PoseGraph, GroundTruth)> {
    let [x0, y0, x1, y1] = spec.bounds;
    if spec.steps < 2 {
        return Err(Error::InvalidArgument("a trajectory needs at least 2 steps".into()));
    }
    if !(x1 > x0 && y1 > y0) || !(spec.step_length > 0.0) || !(spec.loop_radius > 0.0) || spec.max_turn < 0.0 {
        return Err(Error::InvalidArgument("invalid trajectory spec".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let center = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
    let mut p = center;
    let mut heading: f64 = rng.random_range(-PI..PI);
    let mut points = vec![p];
    while points.len() < spec.steps {
        heading += rng.random_range(-spec.max_turn..=spec.max_turn);
        let mut next = [p[0] + spec.step_length * heading.cos(), p[1] + spec.step_length * heading.sin()];
        if !spec.contains(next) {
            heading = (center[1] - p[1]).atan2(center[0] - p[0]);
            next = [p[0] + spec.step_length * heading.cos(), p[1] + spec.step_length * heading.sin()];
        }
        p = [next[0].clamp(x0, x1), next[1].clamp(y0, y1)];
        points.push(p);
    }
    chain_with_loops(&headings(&points), spec.loop_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviations `(x, y, θ)` for odometry.
    pub odometry_sigma: [f64; 3],
    pub loop_sigma: [f64; 3],
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            odometry_sigma: [0.02, 0.02, 0.01],
            loop_sigma: [0.05, 0.05, 0.02],
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn zero(seed: u64) -> Self {
        Self {
            odometry_sigma: [0.0; 3],
            loop_sigma: [0.0; 3],
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.odometry_sigma.iter().chain(&self.loop_sigma).any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("noise standard deviations must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn information(sigma: [f64; 3]) -> Option<InformationMatrix> {
        sigma
            .iter()
            .all(|s| *s > 0.0)
            .then(|| InformationMatrix::from_std_devs(sigma[0], sigma[1], sigma[2]))
            .and_then(|r| r.ok())
    }

    /// `diag(1/σ²)` for odometry, or `None` if any σ is zero.
    pub fn odometry_information(&self) -> Option<InformationMatrix> {
        Self::information(self.odometry_sigma)
    }

    pub fn loop_information(&self) -> Option<InformationMatrix> {
        Self::information(self.loop_sigma)
    }
}

/// Perturbs every measurement with zero-mean Gaussian noise and sets its
/// information to the inverse noise covariance. A kind whose σ has a zero
/// component keeps its information; zero components add no noise.
pub fn add_noise(graph: &mut PoseGraph, noise: &NoiseSpec) -> Result<()> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let ids: Vec<_> = graph.edges().map(|e| e.id).collect();
    let (odo_info, loop_info) = (noise.odometry_information(), noise.loop_information());
    for id in ids {
        let e = graph.edge_mut(id).expect("edge listed above");
        let (sigma, info) = if e.is_odometry() {
            (noise.odometry_sigma, odo_info)
        } else {
            (noise.loop_sigma, loop_info)
        };
        let mut d = [0.0; 3];
        for k in 0..3 {
            if sigma[k] > 0.0 {
                d[k] = Normal::new(0.0, sigma[k]).unwrap().sample(&mut rng);
            }
        }
        let m = e.measurement;
        e.measurement = Pose2::new(m.x + d[0], m.y + d[1], m.theta + d[2]);
        if let Some(info) = info {
            e.info = info;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub fraction: f64,
    pub seed: u64,
    /// `[x_min, y_min, x_max, y_max]`; wrong loop closures claim the target
    /// vertex sits somewhere uniformly random in this box.
    pub arena: [f64; 4],
}

impl CorruptionSpec {
    pub fn for_grid(fraction: f64, seed: u64, grid: &GridSpec) -> Self {
        Self {
            fraction,
            seed,
            arena: [
                0.0,
                0.0,
                (grid.cols - 1) as f64 * grid.spacing,
                (grid.rows - 1) as f64 * grid.spacing,
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::InvalidArgument("corruption fraction must lie in [0, 1]".into()));
        }
        let [x0, y0, x1, y1] = self.arena;
        if !(x1 >= x0 && y1 >= y0) {
            return Err(Error::InvalidArgument("arena bounds are inverted".into()));
        }
        Ok(())
    }
}

/// Replaces the measurement of `⌊fraction · #loop closures⌋` randomly chosen
/// loop closures with a wrong one and marks them corrupted. Information and
/// topology are left alone. Returns the corrupted edge count.
pub fn corrupt_loop_closures(graph: &mut PoseGraph, spec: &CorruptionSpec) -> Result<usize> {
    spec.validate()?;
    let loops: Vec<_> = graph.edges().filter(|e| e.is_loop_closure()).map(|e| e.id).collect();
    let count = (spec.fraction * loops.len() as f64 + 1e-9).floor() as usize;
    if count == 0 {
        return Ok(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<usize> = sample(&mut rng, loops.len(), count).into_vec();
    chosen.sort_unstable();
    let [x0, y0, x1, y1] = spec.arena;
    for k in chosen {
        let id = loops[k];
        let from = graph.pose(graph.edge(id).unwrap().from).unwrap();
        let target = Pose2::new(
            rng.random_range(x0..=x1),
            rng.random_range(y0..=y1),
            PI - rng.random_range(0.0..2.0 * PI),
        );
        let e = graph.edge_mut(id).unwrap();
        e.measurement = from.between(&target);
        e.provenance = Provenance::Corrupted;
    }
    Ok(count)
}

/// Repeated laps over the same rectangle, each lap adding fresh vertices at
/// jittered grid positions, chained by odometry to the previous lap and tied
/// by loop closures to nearby existing vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversalSpec {
    pub grid: GridSpec,
    /// Uniform position jitter, as a fraction of the spacing.
    pub jitter: f64,
    /// Each new vertex closes loops with at most this many nearby vertices.
    pub max_loops_per_vertex: usize,
    pub seed: u64,
}

impl TraversalSpec {
    pub fn new(grid: GridSpec, seed: u64) -> Self {
        Self {
            grid,
            jitter: 0.2,
            max_loops_per_vertex: 6,
            seed,
        }
    }

    pub fn vertices_per_pass(&self) -> usize {
        self.grid.rows * self.grid.cols
    }

    /// Appends lap number `pass` to `graph` and records its ground truth.
    /// Measurements are exact. Returns the new vertex ids.
    pub fn add_pass(&self, graph: &mut PoseGraph, truth: &mut GroundTruth, pass: usize) -> Result<Vec<VertexId>> {
        self.grid.validate()?;
        let n = self.vertices_per_pass();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (pass as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let j = self.jitter * self.grid.spacing;
        let points: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let p = self.grid.position(k);
                [p[0] + rng.random_range(-j..=j), p[1] + rng.random_range(-j..=j)]
            })
            .collect();
        let poses = headings(&points);
        let (odo, lc) = default_infos();
        let radius = self.grid.spacing * self.grid.radius_factor;
        let mut tail = graph.vertices().max_by_key(|v| v.seq).map(|v| v.id);
        let mut added = Vec::with_capacity(n);
        for (k, pose) in poses.iter().enumerate() {
            let id = VertexId((pass * n + k) as u64);
            // Loop partners among the vertices already in the graph, nearest first.
            let mut near: Vec<(f64, VertexId)> = graph
                .vertices()
                .filter(|v| Some(v.id) != tail)
                .map(|v| (v.pose.translation_distance(pose), v.id))
                .filter(|(d, _)| *d < radius)
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            graph.add_vertex(id, *pose)?;
            truth.insert(id, *pose);
            if let Some(prev) = tail {
                let m = truth[&prev].between(pose);
                graph.add_edge(Edge::odometry(prev, id, m, odo))?;
            }
            for (_, other) in near.into_iter().take(self.max_loops_per_vertex) {
                let m = truth[&other].between(pose);
                graph.add_edge(Edge::loop_closure(other, id, m, lc))?;
            }
            tail = Some(id);
            added.push(id);
        }
        Ok(added)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{chi2, RobustKernel};

    #[test]
    fn two_by_two_grid() {
        let (g, truth) = gen_grid(&GridSpec::new(2, 2, 1.0)).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edges().filter(|e| e.is_odometry()).count(), 3);
        // Pairs within 1.5 that are not consecutive: the axis pair closing the
        // square and both diagonals.
        let oracle = (0..4u64)
            .flat_map(|i| (i + 2..4).map(move |j| (i, j)))
            .filter(|&(i, j)| truth[&VertexId(i)].translation_distance(&truth[&VertexId(j)]) < 1.5)
            .count();
        assert_eq!(oracle, 3);
        assert_eq!(g.loop_closure_count(), oracle);
    }

    #[test]
    fn full_grid_is_exact() {
        let (g, truth) = gen_grid(&GridSpec::new(30, 30, 1.0)).unwrap();
        assert_eq!(g.vertex_count(), 900);
        assert_eq!(g.edges().filter(|e| e.is_odometry()).count(), 899);
        assert!(chi2(&g, RobustKernel::None) < 1e-20);
        assert!(g.vertices().all(|v| v.pose == truth[&v.id]));
        assert!(g.edges().all(|e| !e.is_corrupted()));
        g.validate().unwrap();
    }

    #[test]
    fn random_trajectory_basics() {
        let (g, _) = gen_random_trajectory(&TrajectorySpec::new(2, 1)).unwrap();
        assert_eq!((g.edge_count(), g.loop_closure_count()), (1, 0));
        let spec = TrajectorySpec::new(500, 7);
        let (a, ta) = gen_random_trajectory(&spec).unwrap();
        let (b, _) = gen_random_trajectory(&spec).unwrap();
        assert_eq!(a, b);
        assert!(ta.values().all(|p| spec.contains(p.position())));
        assert!(a.loop_closure_count() > 0);
        assert!(gen_random_trajectory(&TrajectorySpec::new(1, 1)).is_err());
    }

    #[test]
    fn zero_noise_is_a_no_op() {
        let (mut g, _) = gen_grid(&GridSpec::new(5, 5, 1.0)).unwrap();
        let before = g.clone();
        add_noise(&mut g, &NoiseSpec::zero(3)).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn noise_information_and_mean() {
        let noise = NoiseSpec::default().with_seed(11);
        let info = noise.loop_information().unwrap();
        let expected = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(400.0, 400.0, 2500.0));
        assert!((info.matrix() - expected).abs().max() < 1e-9);

        // One loop edge perturbed 10⁴ times: the sample mean sits within three
        // standard errors of the exact measurement.
        let mut g = PoseGraph::new();
        g.add_vertex(VertexId(0), Pose2::identity()).unwrap();
        g.add_vertex(VertexId(1), Pose2::new(1.0, 0.5, 0.2)).unwrap();
        let z = Pose2::new(1.0, 0.5, 0.2);
        g.add_edge(Edge::loop_closure(VertexId(0), VertexId(1), z, InformationMatrix::identity()))
            .unwrap();
        let n = 10_000;
        let mut sum = [0.0; 3];
        for s in 0..n {
            let mut h = g.clone();
            add_noise(&mut h, &noise.with_seed(s)).unwrap();
            let m = h.edges().next().unwrap().measurement;
            sum[0] += m.x;
            sum[1] += m.y;
            sum[2] += m.theta;
        }
        let truth = [z.x, z.y, z.theta];
        for k in 0..3 {
            let se = noise.loop_sigma[k] / (n as f64).sqrt();
            assert!((sum[k] / n as f64 - truth[k]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn corruption_counts_and_leaves_odometry_alone() {
        let grid = GridSpec::new(30, 30, 1.0);
        let (g, _) = gen_grid(&grid).unwrap();
        let loops = g.loop_closure_count();

        let mut h = g.clone();
        assert_eq!(corrupt_loop_closures(&mut h, &CorruptionSpec::for_grid(0.0, 1, &grid)).unwrap(), 0);
        assert_eq!(h, g);

        let mut h = g.clone();
        let n = corrupt_loop_closures(&mut h, &CorruptionSpec::for_grid(0.1, 1, &grid)).unwrap();
        assert_eq!(n, loops / 10);
        assert_eq!(h.count_corrupted_loop_closures(), loops / 10);
        for (a, b) in g.edges().zip(h.edges()) {
            assert_eq!((a.id, a.from, a.to, a.kind, &a.info), (b.id, b.from, b.to, b.kind, &b.info));
            if a.is_odometry() {
                assert_eq!(a, b);
            }
        }

        let mut h = g.clone();
        corrupt_loop_closures(&mut h, &CorruptionSpec::for_grid(1.0, 1, &grid)).unwrap();
        assert_eq!(h.count_corrupted_loop_closures(), loops);
    }

    #[test]
    fn traversal_passes_chain_together() {
        let spec = TraversalSpec::new(GridSpec::new(4, 4, 1.0), 5);
        let mut g = PoseGraph::new();
        let mut truth = GroundTruth::new();
        for pass in 0..3 {
            spec.add_pass(&mut g, &mut truth, pass).unwrap();
        }
        assert_eq!(g.vertex_count(), 48);
        assert_eq!(g.edges().filter(|e| e.is_odometry()).count(), 47);
        assert!(g.is_connected());
        assert!(chi2(&g, RobustKernel::None) < 1e-18);
    }
}
