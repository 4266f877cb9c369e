//! Symmetric eigendecomposition, Cholesky, and PSD square roots.
//!
//! The factorizations delegate to `nalgebra`; this module converts to and
//! from [`Matrix`] and adds the validation the callers rely on.

use nalgebra::DMatrix;

use super::{matmul, Matrix};
use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn from_na(m: &DMatrix<f64>) -> Result<Matrix> {
    let (r, c) = m.shape();
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            data.push(m[(i, j)]);
        }
    }
    Matrix::new(r, c, data)
}

/// Eigenvalues (ascending) with matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone().into_data();
        for r in 0..n {
            for c in 0..n {
                scaled[r * n + c] *= f(self.values[c]);
            }
        }
        let scaled = Matrix::new(n, n, scaled)?;
        matmul(&scaled, &self.vectors.transpose())
    }
}

pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let eig = to_na(&m.symmetrized())
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + new_c] = eig.eigenvectors[(r, old_c)];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors: Matrix::new(n, n, vecs)?,
    })
}

/// Lower-triangular `L` with `L·Lᵀ = m`, or an error when `m` is not
/// positive definite.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "cholesky needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let chol = to_na(m)
        .cholesky()
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))?;
    from_na(&chol.l())
}

/// Principal square root of a symmetric PSD matrix.
///
/// Negative eigenvalues produced by rounding are clamped to zero. The result
/// is rejected when `S·S` misses `m` by more than `tol` in relative Frobenius
/// norm, which is how indefinite inputs surface.
pub fn sqrtm_psd(m: &Matrix, tol: f64) -> Result<Matrix> {
    let eig = symmetric_eigen(m)?;
    let root = eig.reconstruct_with(|l| l.max(0.0).sqrt())?.symmetrized();
    let back = matmul(&root, &root)?;
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let residual = back
        .data()
        .iter()
        .zip(m.symmetrized().data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
        / scale;
    if residual > tol {
        return Err(Error::Numeric(format!(
            "matrix square root did not converge: relative residual {residual:.3e}"
        )));
    }
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_psd(n: usize, r: &mut rng::Rng) -> Matrix {
        let a = Matrix::new(n, n, (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        matmul(&a, &a.transpose()).unwrap()
    }

    #[test]
    fn eigen_reconstructs() {
        let mut r = rng::seeded(5);
        let m = random_psd(6, &mut r);
        let eig = symmetric_eigen(&m).unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let back = eig.reconstruct_with(|l| l).unwrap();
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reconstructs_and_rejects_indefinite() {
        let m = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert_eq!(l.get(0, 1), 0.0);
        let back = matmul(&l, &l.transpose()).unwrap();
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        let bad = Matrix::diag(&[1.0, -1.0]).unwrap();
        assert!(cholesky(&bad).is_err());
    }

    #[test]
    fn sqrt_of_diagonal() {
        let m = Matrix::diag(&[4.0, 9.0, 0.0]).unwrap();
        let s = sqrtm_psd(&m, 1e-10).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((s.get(1, 1) - 3.0).abs() < 1e-14);
        assert!(s.get(2, 2).abs() < 1e-14);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = Matrix::diag(&[1.0, -4.0]).unwrap();
        let err = sqrtm_psd(&m, 1e-8).unwrap_err();
        assert!(err.to_string().contains("residual"), "{err}");
    }

    proptest::proptest! {
        #[test]
        fn sqrt_reconstruction(seed in 0u64..500, n in 1usize..12) {
            let mut r = rng::seeded(seed);
            let m = random_psd(n, &mut r);
            let s = sqrtm_psd(&m, 1e-8).unwrap();
            let back = matmul(&s, &s).unwrap();
            let err = back.data().iter().zip(m.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                / m.frobenius_norm();
            proptest::prop_assert!(err <= 1e-8);
        }
    }
}
