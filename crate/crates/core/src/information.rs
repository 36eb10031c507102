use nalgebra::Matrix3;

use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Inverse covariance of a relative-pose measurement, ordered `(x, y, theta)`.
///
/// Always symmetric positive definite; constructors reject anything else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationMatrix(Matrix3<f64>);

impl InformationMatrix {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = matrix.abs().max().max(f64::MIN_POSITIVE);
        if (matrix - matrix.transpose()).abs().max() > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric);
        }
        let symmetric = (matrix + matrix.transpose()) * 0.5;
        if symmetric.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self(symmetric))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Diagonal information, e.g. `1/σ²` per component.
    pub fn from_diagonal(x: f64, y: f64, theta: f64) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&nalgebra::Vector3::new(x, y, theta)))
    }

    /// Information matching independent standard deviations per component.
    pub fn from_std_devs(x: f64, y: f64, theta: f64) -> Result<Self> {
        Self::from_diagonal(1.0 / (x * x), 1.0 / (y * y), 1.0 / (theta * theta))
    }

    pub fn from_covariance(covariance: &Matrix3<f64>) -> Result<Self> {
        let symmetric = (covariance + covariance.transpose()) * 0.5;
        let chol = symmetric.cholesky().ok_or_else(|| {
            Error::SingularCovariance(format!("covariance {symmetric:?} is not positive definite"))
        })?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
        // Cholesky diagonal ratio squared bounds the condition number from below.
        if lo <= 0.0 || (hi / lo).powi(2) > 1e14 {
            return Err(Error::SingularCovariance(format!(
                "covariance {symmetric:?} is ill-conditioned"
            )));
        }
        Self::new(chol.inverse())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        self.0
            .cholesky()
            .expect("information matrices are positive definite")
            .inverse()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `i11 i12 i13 i22 i23 i33`, the g2o ordering.
    pub fn upper_triangle(&self) -> [f64; 6] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 2)],
        ]
    }

    pub fn from_upper_triangle(v: [f64; 6]) -> Result<Self> {
        Self::new(Matrix3::new(
            v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5],
        ))
    }
}

impl std::ops::Add for InformationMatrix {
    type Output = InformationMatrix;

    fn add(self, rhs: Self) -> Self::Output {
        InformationMatrix(self.0 + rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.5;
        assert!(matches!(InformationMatrix::new(m), Err(Error::NotSymmetric)));
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 1.0));
        assert!(matches!(
            InformationMatrix::new(m),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(InformationMatrix::new(Matrix3::zeros()).is_err());
    }

    #[test]
    fn covariance_round_trip() {
        let m = Matrix3::new(4.0, 1.0, 0.2, 1.0, 3.0, 0.1, 0.2, 0.1, 2.0);
        let info = InformationMatrix::new(m).unwrap();
        let back = InformationMatrix::from_covariance(&info.covariance()).unwrap();
        assert!((back.matrix() - m).abs().max() < 1e-12);
    }

    #[test]
    fn upper_triangle_round_trip() {
        let m = Matrix3::new(4.0, 1.0, 0.2, 1.0, 3.0, 0.1, 0.2, 0.1, 2.0);
        let info = InformationMatrix::new(m).unwrap();
        let back = InformationMatrix::from_upper_triangle(info.upper_triangle()).unwrap();
        assert_eq!(info, back);
    }

    #[test]
    fn ill_conditioned_covariance_is_rejected() {
        let cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, 1e-20));
        assert!(matches!(
            InformationMatrix::from_covariance(&cov),
            Err(Error::SingularCovariance(_))
        ));
    }
}
