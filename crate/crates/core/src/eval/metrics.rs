use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{PoseGraph, VertexId};
use crate::pose::Pose2;
use crate::synthetic::GroundTruth;

/// Aggregated translational and rotational errors. Standard deviations are
/// population SDs; angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub translation_mean: f64,
    pub translation_sd: f64,
    pub rotation_mean_deg: f64,
    pub rotation_sd_deg: f64,
    pub translation_errors: Vec<f64>,
    pub rotation_errors_deg: Vec<f64>,
    /// Mean reference distance between compared vertex pairs. Only set by
    /// [`relative_map_error`]; large values mean the relative metric has
    /// drifted toward a global one.
    pub mean_pair_distance: Option<f64>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricResult {
    fn from_errors(translation_errors: Vec<f64>, rotation_errors_deg: Vec<f64>) -> Self {
        let (translation_mean, translation_sd) = mean_sd(&translation_errors);
        let (rotation_mean_deg, rotation_sd_deg) = mean_sd(&rotation_errors_deg);
        Self {
            translation_mean,
            translation_sd,
            rotation_mean_deg,
            rotation_sd_deg,
            translation_errors,
            rotation_errors_deg,
            mean_pair_distance: None,
        }
    }

    fn from_pairs(pairs: impl Iterator<Item = (Pose2, Pose2)>) -> Self {
        let (t, r): (Vec<f64>, Vec<f64>) = pairs
            .map(|(est, reference)| {
                let d = reference.between(&est);
                (d.x.hypot(d.y), d.theta.abs().to_degrees())
            })
            .unzip();
        Self::from_errors(t, r)
    }
}

/// Index-wise comparison of two pose streams, typically the newest pose right
/// after each incremental update against the reference at the same step.
pub fn trajectory_error(estimates: &[Pose2], reference: &[Pose2]) -> Result<MetricResult> {
    if estimates.len() != reference.len() {
        return Err(Error::LengthMismatch(estimates.len(), reference.len()));
    }
    Ok(MetricResult::from_pairs(estimates.iter().copied().zip(reference.iter().copied())))
}

fn check_association(g: &PoseGraph, reference: &GroundTruth) -> Result<()> {
    let missing: Vec<VertexId> = g.vertex_ids().filter(|v| !reference.contains_key(v)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingReference(missing))
    }
}

/// Absolute pose errors of every vertex of `g` against the reference with the
/// same id, after moving `g` rigidly so its gauge vertex sits at the gauge's
/// reference pose.
pub fn map_error(g: &PoseGraph, reference: &GroundTruth) -> Result<MetricResult> {
    check_association(g, reference)?;
    let Some(gauge) = g.gauge() else {
        return Ok(MetricResult::from_errors(Vec::new(), Vec::new()));
    };
    let align = reference[&gauge].compose(&g.pose(gauge).unwrap().inverse());
    Ok(MetricResult::from_pairs(
        g.vertices().map(|v| (align.compose(&v.pose), reference[&v.id])),
    ))
}

/// Errors of the relative pose between each pair of consecutive vertices (by
/// insertion order) against the same pair in the reference.
pub fn relative_map_error(g: &PoseGraph, reference: &GroundTruth) -> Result<MetricResult> {
    if g.vertex_count() < 2 {
        return Err(Error::InvalidArgument("relative map error needs at least 2 vertices".into()));
    }
    check_association(g, reference)?;
    let mut order: Vec<_> = g.vertices().collect();
    order.sort_by_key(|v| v.seq);
    let mut distances = Vec::with_capacity(order.len() - 1);
    let pairs: Vec<(Pose2, Pose2)> = order
        .windows(2)
        .map(|w| {
            let (ra, rb) = (reference[&w[0].id], reference[&w[1].id]);
            distances.push(ra.translation_distance(&rb));
            (w[0].pose.between(&w[1].pose), ra.between(&rb))
        })
        .collect();
    let mut m = MetricResult::from_pairs(pairs.into_iter());
    m.mean_pair_distance = Some(distances.iter().sum::<f64>() / distances.len() as f64);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gen_grid, GridSpec};

    fn rigid(g: &PoseGraph, t: Pose2) -> PoseGraph {
        let mut h = g.clone();
        for v in g.vertices() {
            h.set_pose(v.id, t.compose(&v.pose)).unwrap();
        }
        h
    }

    #[test]
    fn trajectory_error_cases() {
        let a: Vec<Pose2> = (0..5).map(|i| Pose2::new(i as f64, 0.0, 0.1 * i as f64)).collect();
        let m = trajectory_error(&a, &a).unwrap();
        assert!(m.translation_mean < 1e-15 && m.translation_sd < 1e-15 && m.rotation_mean_deg < 1e-12);

        let shifted: Vec<Pose2> = a.iter().map(|p| Pose2::new(p.x, p.y + 1.0, p.theta)).collect();
        let m = trajectory_error(&shifted, &a).unwrap();
        assert!((m.translation_mean - 1.0).abs() < 1e-12 && m.translation_sd < 1e-12);

        // Direct summation oracle for three hand-built error pairs.
        let est = [Pose2::new(3.0, 4.0, 0.0), Pose2::new(0.0, 1.0, 0.5), Pose2::new(2.0, 0.0, -0.25)];
        let reference = [Pose2::identity(); 3];
        let m = trajectory_error(&est, &reference).unwrap();
        let t = [5.0, 1.0, 2.0];
        let mean = (5.0 + 1.0 + 2.0) / 3.0;
        let sd = (t.iter().map(|x: &f64| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((m.translation_mean - mean).abs() < 1e-12);
        assert!((m.translation_sd - sd).abs() < 1e-12);
        let rmean = (0.0 + 0.5f64.to_degrees() + 0.25f64.to_degrees()) / 3.0;
        assert!((m.rotation_mean_deg - rmean).abs() < 1e-9);

        assert!(matches!(trajectory_error(&a[..2], &a), Err(Error::LengthMismatch(2, 5))));
    }

    #[test]
    fn map_error_removes_a_rigid_offset() {
        let (g, truth) = gen_grid(&GridSpec::new(5, 5, 1.0)).unwrap();
        assert!(map_error(&g, &truth).unwrap().translation_mean < 1e-15);
        let moved = rigid(&g, Pose2::new(3.0, -2.0, 0.7));
        let m = map_error(&moved, &truth).unwrap();
        assert!(m.translation_mean < 1e-12 && m.rotation_mean_deg < 1e-9);
    }

    #[test]
    fn map_error_uses_surviving_ids_only() {
        let (mut g, truth) = gen_grid(&GridSpec::new(5, 5, 1.0)).unwrap();
        g.set_pose(VertexId(7), Pose2::new(100.0, 100.0, 0.0)).unwrap();
        g.remove_vertex(VertexId(7)).unwrap();
        let m = map_error(&g, &truth).unwrap();
        assert_eq!(m.translation_errors.len(), 24);
        assert!(m.translation_mean < 1e-15);

        let mut partial = truth.clone();
        partial.remove(&VertexId(3));
        partial.remove(&VertexId(9));
        match map_error(&g, &partial) {
            Err(Error::MissingReference(ids)) => assert_eq!(ids, vec![VertexId(3), VertexId(9)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relative_error_is_rigid_invariant_and_audits_distance() {
        let (g, truth) = gen_grid(&GridSpec::new(5, 5, 1.0)).unwrap();
        let moved = rigid(&g, Pose2::new(-1.0, 4.0, 2.0));
        let m = relative_map_error(&moved, &truth).unwrap();
        assert!(m.translation_mean < 1e-12 && m.rotation_mean_deg < 1e-9);
        assert!((m.mean_pair_distance.unwrap() - 1.0).abs() < 1e-12);

        // Drop every other vertex: survivors are compared across the gaps.
        let mut pruned = g.clone();
        for id in (1..24).step_by(2) {
            pruned.remove_vertex(VertexId(id)).unwrap();
        }
        let ids: Vec<u64> = pruned.vertex_ids().map(|v| v.0).collect();
        let oracle: f64 = ids
            .windows(2)
            .map(|w| truth[&VertexId(w[0])].translation_distance(&truth[&VertexId(w[1])]))
            .sum::<f64>()
            / (ids.len() - 1) as f64;
        let m = relative_map_error(&pruned, &truth).unwrap();
        assert!((m.mean_pair_distance.unwrap() - oracle).abs() < 1e-12);
        assert!(m.mean_pair_distance.unwrap() > 1.5);

        let mut tiny = PoseGraph::new();
        tiny.add_vertex(VertexId(0), Pose2::identity()).unwrap();
        assert!(relative_map_error(&tiny, &truth).is_err());
    }
}
