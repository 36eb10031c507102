use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Sparse symmetric positive-definite solver that keeps its symbolic
/// factorization across calls with the same sparsity pattern.
pub struct SparseCholesky {
    dim: usize,
    symbolic: Option<SymbolicLlt<usize>>,
}

impl SparseCholesky {
    pub fn new(dim: usize) -> Self {
        Self { dim, symbolic: None }
    }

    /// Solves `A x = b`, where `A` is given as `(row, col, value)` triplets
    /// with duplicates summed. Only the lower triangle is read.
    pub fn solve(&mut self, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::LengthMismatch(rhs.len(), self.dim));
        }
        let entries: Vec<Triplet<usize, usize, f64>> =
            triplets.iter().filter(|t| t.0 >= t.1).map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.dim, self.dim, &entries)
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                    .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let llt = Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("normal equations are not positive definite: {e:?}")))?;
        let b = Mat::from_fn(self.dim, 1, |i, _| rhs[i]);
        let x = llt.solve(&b);
        let out: Vec<f64> = (0..self.dim).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for _ in 0..80 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            let v: f64 = rng.random_range(-1.0..1.0);
            dense[(i, j)] += v;
            dense[(j, i)] += v;
        }
        for i in 0..n {
            dense[(i, i)] += 10.0;
        }
        let rhs = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let oracle = dense.clone().cholesky().unwrap().solve(&rhs);

        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if dense[(i, j)] != 0.0 {
                    // Split entries in two to exercise duplicate summation.
                    triplets.push((i, j, 0.5 * dense[(i, j)]));
                    triplets.push((i, j, 0.5 * dense[(i, j)]));
                }
            }
        }
        let mut solver = SparseCholesky::new(n);
        for _ in 0..2 {
            let x = solver.solve(&triplets, rhs.as_slice()).unwrap();
            for i in 0..n {
                assert!((x[i] - oracle[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_system_is_rejected() {
        let mut solver = SparseCholesky::new(2);
        let t = [(0, 0, 1.0), (1, 1, -1.0)];
        assert!(matches!(solver.solve(&t, &[1.0, 1.0]), Err(Error::SingularSystem(_))));
    }
}
