//! Vertex densities in the plane: the fixed-radius `r`-density and the
//! scale-invariant density, which integrates the `r`-density over every
//! radius and has the closed form `(1/π) Σ_k 1/‖v_k − v_i‖`.
//!
//! Neighbor queries go through a uniform bucket grid whose cell size tracks
//! the median nearest-neighbor spacing. Points can be removed; the grid is
//! rebuilt once enough of them are gone.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::{PoseGraph, VertexId};

/// Distances below this are clamped before inversion.
pub const MIN_DISTANCE: f64 = 1e-6;

/// A scale-invariant density together with how many neighbor distances had to
/// be clamped to [`MIN_DISTANCE`]. Clean data has `clamped == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidValue {
    pub density: f64,
    pub clamped: usize,
}

#[derive(Debug, Clone)]
pub struct PointSet {
    points: Vec<[f64; 2]>,
    alive: Vec<bool>,
    live: usize,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    /// Occupied cell range, inclusive.
    bounds: ((i64, i64), (i64, i64)),
    removed_since_rebuild: usize,
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl PointSet {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("point positions must be finite".into()));
        }
        let n = points.len();
        let mut set = Self {
            points,
            alive: vec![true; n],
            live: n,
            cell: 1.0,
            buckets: HashMap::new(),
            bounds: ((0, 0), (0, 0)),
            removed_since_rebuild: 0,
        };
        set.rebuild();
        Ok(set)
    }

    /// Positions of every vertex, indexed in ascending id order. The returned
    /// ids map point indices back to vertices.
    pub fn from_graph(graph: &PoseGraph) -> Result<(Self, Vec<VertexId>)> {
        let ids: Vec<VertexId> = graph.vertex_ids().collect();
        let points = graph.vertices().map(|v| v.pose.position()).collect();
        Ok((Self::new(points)?, ids))
    }

    /// Number of points still present.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Total number of indices, removed ones included.
    pub fn capacity(&self) -> usize {
        self.points.len()
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    pub fn contains(&self, i: usize) -> bool {
        self.alive.get(i).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.points.len()).filter(|&i| self.alive[i])
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn key(&self, p: &[f64; 2]) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn bucket_with(&mut self, cell: f64) {
        self.cell = cell;
        self.buckets.clear();
        let mut lo = (i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN);
        for i in 0..self.points.len() {
            if !self.alive[i] {
                continue;
            }
            let k = self.key(&self.points[i]);
            lo = (lo.0.min(k.0), lo.1.min(k.1));
            hi = (hi.0.max(k.0), hi.1.max(k.1));
            self.buckets.entry(k).or_default().push(i);
        }
        self.bounds = (lo, hi);
        self.removed_since_rebuild = 0;
    }

    /// Re-buckets the live points with a cell size equal to their median
    /// nearest-neighbor distance.
    pub fn rebuild(&mut self) {
        let live: Vec<usize> = self.indices().collect();
        if live.len() < 2 {
            self.bucket_with(1.0);
            return;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &i in &live {
            for d in 0..2 {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max((hi[0] - lo[0]).max(hi[1] - lo[1]).powi(2) * 1e-3);
        let guess = (area / live.len() as f64).sqrt();
        self.bucket_with(if guess > MIN_DISTANCE { guess } else { 1.0 });
        let mut nn: Vec<f64> = live
            .iter()
            .filter_map(|&i| self.knn_with_distances(i, 1).first().map(|x| x.0))
            .collect();
        nn.sort_by(f64::total_cmp);
        let median = nn[nn.len() / 2];
        if median > MIN_DISTANCE {
            self.bucket_with(median);
        }
    }

    /// Removes a point. Outstanding neighbor lists that mention it are stale.
    pub fn remove(&mut self, i: usize) {
        if !self.contains(i) {
            return;
        }
        self.alive[i] = false;
        self.live -= 1;
        let k = self.key(&self.points[i]);
        if let Some(bucket) = self.buckets.get_mut(&k) {
            bucket.retain(|&j| j != i);
        }
        self.removed_since_rebuild += 1;
        if self.removed_since_rebuild * 2 > self.live.max(8) {
            self.rebuild();
        }
    }

    fn ring(&self, center: (i64, i64), radius: i64, mut visit: impl FnMut(usize)) {
        let mut cell = |cx: i64, cy: i64| {
            if let Some(b) = self.buckets.get(&(cx, cy)) {
                b.iter().for_each(|&j| visit(j));
            }
        };
        if radius == 0 {
            cell(center.0, center.1);
            return;
        }
        for dx in -radius..=radius {
            cell(center.0 + dx, center.1 - radius);
            cell(center.0 + dx, center.1 + radius);
        }
        for dy in (-radius + 1)..radius {
            cell(center.0 - radius, center.1 + dy);
            cell(center.0 + radius, center.1 + dy);
        }
    }

    /// The `k` nearest other points to `i` with their distances, ascending by
    /// distance and then by index.
    pub fn knn_with_distances(&self, i: usize, k: usize) -> Vec<(f64, usize)> {
        if k == 0 || !self.contains(i) {
            return Vec::new();
        }
        let q = self.points[i];
        let center = self.key(&q);
        let ((lx, ly), (hx, hy)) = self.bounds;
        let max_ring = [center.0 - lx, hx - center.0, center.1 - ly, hy - center.1]
            .into_iter()
            .max()
            .unwrap_or(0)
            .max(0);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for r in 0..=max_ring {
            self.ring(center, r, |j| {
                if j != i {
                    found.push((dist(&q, &self.points[j]), j));
                }
            });
            if found.len() >= k {
                found.sort_by(by_distance);
                found.truncate(k);
                // Anything in ring r+1 is at least r*cell away.
                if found[k - 1].0 < r as f64 * self.cell {
                    break;
                }
            }
        }
        found.sort_by(by_distance);
        found.truncate(k);
        found
    }

    pub fn knn(&self, i: usize, k: usize) -> Vec<usize> {
        self.knn_with_distances(i, k).into_iter().map(|(_, j)| j).collect()
    }

    /// Other points strictly closer than `r` to point `i`.
    pub fn within_radius(&self, i: usize, r: f64) -> Vec<usize> {
        let q = self.points[i];
        let center = self.key(&q);
        let reach = (r / self.cell).ceil() as i64 + 1;
        let mut out = Vec::new();
        for ring in 0..=reach {
            self.ring(center, ring, |j| {
                if j != i && dist(&q, &self.points[j]) < r {
                    out.push(j);
                }
            });
        }
        out.sort_unstable();
        out
    }

    /// Neighbors strictly inside radius `r`, divided by the disc area.
    pub fn r_density(&self, i: usize, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
        }
        Ok(self.within_radius(i, r).len() as f64 / (PI * r * r))
    }

    /// Closed-form scale-invariant density over all other points.
    pub fn sid_exact(&self, i: usize) -> SidValue {
        let q = self.points[i];
        let mut clamped = 0;
        let sum: f64 = self
            .indices()
            .filter(|&j| j != i)
            .map(|j| {
                let d = dist(&q, &self.points[j]);
                if d < MIN_DISTANCE {
                    clamped += 1;
                    1.0 / MIN_DISTANCE
                } else {
                    1.0 / d
                }
            })
            .sum();
        SidValue {
            density: sum / PI,
            clamped,
        }
    }

    /// Scale-invariant density restricted to the `neighbors` closest points.
    pub fn sid_truncated(&self, i: usize, neighbors: usize) -> Result<SidValue> {
        if neighbors == 0 {
            return Err(Error::InvalidArgument("neighbor count must be at least 1".into()));
        }
        Ok(self.sid_from_knn(&self.knn_with_distances(i, neighbors)))
    }

    pub(crate) fn sid_from_knn(&self, knn: &[(f64, usize)]) -> SidValue {
        let mut clamped = 0;
        let sum: f64 = knn
            .iter()
            .map(|&(d, _)| {
                if d < MIN_DISTANCE {
                    clamped += 1;
                    1.0 / MIN_DISTANCE
                } else {
                    1.0 / d
                }
            })
            .sum();
        SidValue {
            density: sum / PI,
            clamped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid3() -> PointSet {
        let pts = (0..9).map(|k| [(k % 3) as f64, (k / 3) as f64]).collect();
        PointSet::new(pts).unwrap()
    }

    #[test]
    fn r_density_examples() {
        let ps = PointSet::new(vec![[0.0, 0.0], [0.5, 0.0]]).unwrap();
        assert!((ps.r_density(0, 1.0).unwrap() - 1.0 / PI).abs() < 1e-12);
        assert_eq!(ps.r_density(0, 0.4).unwrap(), 0.0);
        // Strict inequality: a neighbor exactly on the circle does not count.
        assert_eq!(ps.r_density(0, 0.5).unwrap(), 0.0);
        let g = grid3();
        assert!((g.r_density(4, 1.2).unwrap() - 4.0 / (PI * 1.44)).abs() < 1e-12);
        assert!((g.r_density(4, 1.2).unwrap() - 0.88419).abs() < 1e-5);
        assert!(matches!(g.r_density(4, 0.0), Err(Error::InvalidArgument(_))));
        assert!(g.r_density(4, -1.0).is_err());
    }

    #[test]
    fn sid_small_examples() {
        let two = PointSet::new(vec![[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!((two.sid_exact(0).density - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let three = PointSet::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!((three.sid_exact(1).density - 2.0 / PI).abs() < 1e-15);
        let one = PointSet::new(vec![[3.0, 1.0]]).unwrap();
        assert_eq!(one.sid_exact(0).density, 0.0);
    }

    #[test]
    fn truncated_sid_on_small_grid() {
        let g = grid3();
        let four = g.sid_truncated(4, 4).unwrap().density;
        assert!((four - 4.0 / PI).abs() < 1e-12);
        let all = g.sid_truncated(4, 10).unwrap().density;
        assert!((all - (4.0 + 4.0 / 2f64.sqrt()) / PI).abs() < 1e-12);
        assert!((all - 2.17356).abs() < 1e-5);
        assert!((all - g.sid_exact(4).density).abs() < 1e-12);
        assert!(g.sid_truncated(4, 0).is_err());
    }

    #[test]
    fn duplicate_positions_are_clamped_and_counted() {
        let ps = PointSet::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        let v = ps.sid_exact(0);
        assert_eq!(v.clamped, 1);
        assert!(v.density.is_finite());
        assert_eq!(grid3().sid_exact(4).clamped, 0);
    }

    #[test]
    fn knn_examples() {
        let ps = PointSet::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(ps.knn(1, 2), vec![0, 2]);
        assert_eq!(ps.knn(1, 10), vec![0, 2]);
        assert!(PointSet::new(vec![[f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn knn_matches_exhaustive_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..3.0)])
            .collect();
        let mut ps = PointSet::new(pts.clone()).unwrap();
        let check = |ps: &PointSet| {
            for i in ps.indices() {
                let mut all: Vec<(f64, usize)> = ps
                    .indices()
                    .filter(|&j| j != i)
                    .map(|j| (dist(&pts[i], &pts[j]), j))
                    .collect();
                all.sort_by(by_distance);
                for k in [1, 7, 25] {
                    let expected: Vec<usize> = all.iter().take(k).map(|x| x.1).collect();
                    assert_eq!(ps.knn(i, k), expected);
                }
            }
        };
        check(&ps);
        for i in (0..200).step_by(3) {
            ps.remove(i);
        }
        assert_eq!(ps.len(), 133);
        check(&ps);
    }

    #[test]
    fn radius_query_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 2]> = (0..150)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let ps = PointSet::new(pts.clone()).unwrap();
        for i in 0..150 {
            for r in [0.05, 0.3, 1.1] {
                let expected: Vec<usize> = (0..150)
                    .filter(|&j| j != i && dist(&pts[i], &pts[j]) < r)
                    .collect();
                assert_eq!(ps.within_radius(i, r), expected);
            }
        }
    }
}
