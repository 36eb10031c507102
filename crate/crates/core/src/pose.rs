//! SE(2) pose algebra.
//!
//! Poses are stored as `(x, y, theta)` with the heading kept in `(-pi, pi]`.
//! Uncertainty attached to a pose is expressed additively on that vector, so
//! translational noise lives in the frame the pose is expressed in. The
//! Jacobians below follow that convention.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// A rigid transform in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for Pose2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.theta)
    }
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Group product `self ⊕ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// `self⁻¹ ⊕ other`, the pose of `other` seen from `self`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn translation_distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Vector difference `self - other` with the angle component wrapped.
    pub fn difference(&self, other: &Pose2) -> Vector3<f64> {
        Vector3::new(
            self.x - other.x,
            self.y - other.y,
            normalize_angle(self.theta - other.theta),
        )
    }

    /// Adds a perturbation to the pose vector and wraps the heading.
    pub fn retract(&self, delta: &Vector3<f64>) -> Pose2 {
        Pose2::new(self.x + delta[0], self.y + delta[1], self.theta + delta[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Jacobians of `a ⊕ b` with respect to `a` and `b`.
pub fn compose_jacobians(a: &Pose2, b: &Pose2) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = a.theta.sin_cos();
    let ja = Matrix3::new(
        1.0,
        0.0,
        -s * b.x - c * b.y,
        0.0,
        1.0,
        c * b.x - s * b.y,
        0.0,
        0.0,
        1.0,
    );
    let jb = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    (ja, jb)
}

/// Jacobian of `a⁻¹` with respect to `a`.
pub fn inverse_jacobian(a: &Pose2) -> Matrix3<f64> {
    let (s, c) = a.theta.sin_cos();
    Matrix3::new(
        -c,
        -s,
        s * a.x - c * a.y,
        s,
        -c,
        c * a.x + s * a.y,
        0.0,
        0.0,
        -1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn homogeneous(p: &Pose2) -> Matrix3<f64> {
        let (s, c) = p.theta.sin_cos();
        Matrix3::new(c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0)
    }

    fn assert_pose_close(a: &Pose2, b: &Pose2, tol: f64) {
        assert!(
            (a.x - b.x).abs() < tol
                && (a.y - b.y).abs() < tol
                && normalize_angle(a.theta - b.theta).abs() < tol,
            "{a} != {b}"
        );
    }

    #[test]
    fn angle_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::identity().compose(&Pose2::new(1.0, 0.0, 0.0));
        assert_pose_close(&p, &Pose2::new(1.0, 0.0, 0.0), 1e-15);
        let p = Pose2::new(0.0, 0.0, PI / 2.0).compose(&Pose2::new(1.0, 0.0, 0.0));
        assert_pose_close(&p, &Pose2::new(0.0, 1.0, PI / 2.0), 1e-15);
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let a = Pose2::new(1.0, 2.0, 0.3);
        let b = Pose2::new(0.5, -0.2, 0.1);
        let m = homogeneous(&a) * homogeneous(&b);
        let expected = Pose2::new(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)]));
        assert_pose_close(&a.compose(&b), &expected, 1e-14);
    }

    #[test]
    fn inverse_examples() {
        assert_pose_close(&Pose2::identity().inverse(), &Pose2::identity(), 1e-15);
        assert_pose_close(
            &Pose2::new(1.0, 0.0, 0.0).inverse(),
            &Pose2::new(-1.0, 0.0, 0.0),
            1e-15,
        );
        let a = Pose2::new(1.0, 2.0, 0.3);
        assert_pose_close(&a.compose(&a.inverse()), &Pose2::identity(), 1e-12);
    }

    fn central_difference<F: Fn(&Vector3<f64>) -> Vector3<f64>>(
        f: F,
        at: Vector3<f64>,
    ) -> Matrix3<f64> {
        let h = 1e-6;
        let mut j = Matrix3::zeros();
        for k in 0..3 {
            let mut plus = at;
            let mut minus = at;
            plus[k] += h;
            minus[k] -= h;
            let d = Pose2::from_vector(&f(&plus)).difference(&Pose2::from_vector(&f(&minus)));
            j.set_column(k, &(d / (2.0 * h)));
        }
        j
    }

    fn arb_pose() -> impl Strategy<Value = Pose2> {
        (-5.0..5.0f64, -5.0..5.0f64, -3.1..3.1f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.x - r.x).abs() < 1e-10);
            prop_assert!((l.y - r.y).abs() < 1e-10);
            prop_assert!(normalize_angle(l.theta - r.theta).abs() < 1e-10);
        }

        #[test]
        fn heading_stays_normalized(a in arb_pose(), b in arb_pose()) {
            let p = a.compose(&b);
            prop_assert!(p.theta > -PI && p.theta <= PI);
            let q = a.inverse();
            prop_assert!(q.theta > -PI && q.theta <= PI);
        }

        #[test]
        fn compose_jacobians_match_finite_differences(a in arb_pose(), b in arb_pose()) {
            let (ja, jb) = compose_jacobians(&a, &b);
            let na = central_difference(|v| Pose2::from_vector(v).compose(&b).to_vector(), a.to_vector());
            let nb = central_difference(|v| a.compose(&Pose2::from_vector(v)).to_vector(), b.to_vector());
            prop_assert!((ja - na).abs().max() < 1e-5);
            prop_assert!((jb - nb).abs().max() < 1e-5);
        }

        #[test]
        fn inverse_jacobian_matches_finite_differences(a in arb_pose()) {
            let j = inverse_jacobian(&a);
            let n = central_difference(|v| Pose2::from_vector(v).inverse().to_vector(), a.to_vector());
            prop_assert!((j - n).abs().max() < 1e-5);
        }
    }
}
