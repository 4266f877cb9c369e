//! Noisy quadratic model.
//!
//! Loss `L(θ) = ½ (θ − c)ᵀ H (θ − c)`. A per-example gradient is the true
//! gradient `H(θ − c)` plus a Gaussian draw with covariance `Σ` that does not
//! depend on `θ`. Every quantity the noise-scale estimators target is
//! therefore available in closed form.

use std::path::Path;

use super::ModelGradients;
use crate::error::{Error, Result};
use crate::kvfile::KvFile;
use crate::numcore::{self, cholesky, matmul, symmetric_eigen, Matrix};
use crate::rng::{self, Rng};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    dim: usize,
    hessian: Matrix,
    noise_cov: Matrix,
    // L with L·Lᵀ = Σ, used to draw noise
    noise_factor: Matrix,
    center: Vec<f64>,
    seed: u64,
}

/// Exact noise scales at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScales {
    /// `tr(HΣ) / GᵀHG`
    pub b_noise: f64,
    /// `tr(Σ) / |G|²`
    pub b_simple: f64,
}

impl QuadraticSpec {
    /// Builds a spec from `H` and `Σ`. The sampling factor is the Cholesky
    /// factor of `Σ`, or `V·diag(√λ₊)` when `Σ` is only semidefinite.
    pub fn new(hessian: Matrix, noise_cov: Matrix, center: Vec<f64>, seed: u64) -> Result<Self> {
        let dim = Self::check_hessian(&hessian, &center)?;
        check_square(&noise_cov, dim, "noise covariance")?;
        if noise_cov.asymmetry() > SYMMETRY_TOL {
            return Err(Error::Config(format!(
                "noise covariance is not symmetric (max asymmetry {:.3e})",
                noise_cov.asymmetry()
            )));
        }
        let noise_factor = match cholesky(&noise_cov) {
            Ok(l) => l,
            Err(_) => {
                let eig = symmetric_eigen(&noise_cov)?;
                let scale = eig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                if let Some(&neg) = eig.values.iter().find(|&&v| v < -1e-10 * scale) {
                    return Err(Error::Config(format!(
                        "noise covariance is not positive semidefinite (eigenvalue {neg:.3e})"
                    )));
                }
                let n = dim;
                let mut f = eig.vectors.into_data();
                for r in 0..n {
                    for c in 0..n {
                        f[r * n + c] *= eig.values[c].max(0.0).sqrt();
                    }
                }
                Matrix::new(n, n, f)?
            }
        };
        Ok(Self {
            dim,
            hessian,
            noise_cov,
            noise_factor,
            center,
            seed,
        })
    }

    /// Builds a spec whose noise covariance is `factor · factorᵀ`, which is
    /// PSD by construction.
    pub fn with_noise_factor(
        hessian: Matrix,
        factor: Matrix,
        center: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let dim = Self::check_hessian(&hessian, &center)?;
        if factor.rows() != dim {
            return Err(Error::Shape(format!(
                "noise factor must have {dim} rows, got {}",
                factor.rows()
            )));
        }
        let noise_cov = matmul(&factor, &factor.transpose())?.symmetrized();
        Ok(Self {
            dim,
            hessian,
            noise_cov,
            noise_factor: factor,
            center,
            seed,
        })
    }

    fn check_hessian(hessian: &Matrix, center: &[f64]) -> Result<usize> {
        let dim = center.len();
        if dim == 0 {
            return Err(Error::Config("quadratic dimension must be positive".into()));
        }
        check_square(hessian, dim, "hessian")?;
        if hessian.asymmetry() > SYMMETRY_TOL {
            return Err(Error::Config(format!(
                "hessian is not symmetric (max asymmetry {:.3e})",
                hessian.asymmetry()
            )));
        }
        let eig = symmetric_eigen(hessian)?;
        if eig.values[0] <= 0.0 {
            return Err(Error::Config(format!(
                "hessian must be positive definite, smallest eigenvalue {:.3e}",
                eig.values[0]
            )));
        }
        Ok(dim)
    }

    /// Parses the flat key-value format:
    ///
    /// ```text
    /// dim = 2
    /// hessian = 1 0 0 1      # row-major
    /// noise_cov = 1 0 0 1    # or: noise_factor = ...
    /// center = 0 0
    /// theta = 3 4            # optional evaluation point
    /// seed = 7               # optional, default 0
    /// ```
    pub fn parse(text: &str) -> Result<(Self, Option<Vec<f64>>)> {
        let kv = KvFile::parse(text)?;
        Self::from_kv(&kv)
    }

    pub fn load(path: &Path) -> Result<(Self, Option<Vec<f64>>)> {
        Self::from_kv(&KvFile::load(path)?)
    }

    fn from_kv(kv: &KvFile) -> Result<(Self, Option<Vec<f64>>)> {
        let dim: usize = kv.require("dim")?;
        let square = |key: &str| -> Result<Option<Matrix>> {
            kv.get_list::<f64>(key)?
                .map(|v| {
                    if v.len() != dim * dim {
                        return Err(Error::Shape(format!(
                            "`{key}` needs {} entries for dim {dim}, got {}",
                            dim * dim,
                            v.len()
                        )));
                    }
                    Matrix::new(dim, dim, v)
                })
                .transpose()
        };
        let vector = |key: &str| -> Result<Option<Vec<f64>>> {
            kv.get_list::<f64>(key)?
                .map(|v| {
                    if v.len() != dim {
                        return Err(Error::Shape(format!(
                            "`{key}` needs {dim} entries, got {}",
                            v.len()
                        )));
                    }
                    Ok(v)
                })
                .transpose()
        };
        let hessian =
            square("hessian")?.ok_or_else(|| Error::Config("missing required key `hessian`".into()))?;
        let center = vector("center")?.unwrap_or_else(|| vec![0.0; dim]);
        let theta = vector("theta")?;
        let seed = kv.get("seed")?.unwrap_or(0);
        let spec = match (square("noise_cov")?, square("noise_factor")?) {
            (Some(cov), None) => Self::new(hessian, cov, center, seed)?,
            (None, Some(f)) => Self::with_noise_factor(hessian, f, center, seed)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `noise_cov` or `noise_factor`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "missing `noise_cov` (or `noise_factor`)".into(),
                ))
            }
        };
        Ok((spec, theta))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn noise_cov(&self) -> &Matrix {
        &self.noise_cov
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Shape(format!(
                "quadratic has dimension {}, theta has {}",
                self.dim,
                theta.len()
            )));
        }
        Ok(())
    }

    fn offset(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.center).map(|(t, c)| t - c).collect()
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let d = self.offset(theta);
        Ok(0.5 * numcore::dot(&d, &self.hessian.matvec(&d)?))
    }

    /// True gradient `G = H(θ − c)`.
    pub fn true_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.hessian.matvec(&self.offset(theta))
    }

    /// `GᵀHG` at `theta`.
    pub fn curvature_along_gradient(&self, theta: &[f64]) -> Result<f64> {
        let g = self.true_gradient(theta)?;
        Ok(numcore::dot(&g, &self.hessian.matvec(&g)?))
    }

    /// Step size minimising the loss along the true gradient, `|G|²/GᵀHG`.
    pub fn eps_max(&self, theta: &[f64]) -> Result<f64> {
        let g = self.nonzero_gradient(theta)?;
        Ok(numcore::norm_sq(&g) / numcore::dot(&g, &self.hessian.matvec(&g)?))
    }

    /// `tr(HΣ)`.
    pub fn trace_h_sigma(&self) -> f64 {
        let h = &self.hessian;
        let s = &self.noise_cov;
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|k| h.get(i, k) * s.get(k, i)).sum::<f64>())
            .sum()
    }

    fn nonzero_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let g = self.true_gradient(theta)?;
        if g.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(
                "gradient is zero at the minimizer; the noise scale is undefined there".into(),
            ));
        }
        Ok(g)
    }

    /// Draws `batch_size` per-example gradients at `theta` and averages them.
    pub fn sample_grads(
        &self,
        theta: &[f64],
        batch_size: usize,
        rng: &mut Rng,
        want_per_example: bool,
    ) -> Result<ModelGradients> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let g = self.true_gradient(theta)?;
        let n = self.dim;
        if !want_per_example {
            // L·Σz has the distribution of the summed per-example noise
            let mut zsum = vec![0.0; n];
            for _ in 0..batch_size {
                zsum.iter_mut().for_each(|v| *v += rng::standard_normal(rng));
            }
            let noise = self.noise_factor.matvec(&zsum)?;
            let inv = 1.0 / batch_size as f64;
            return Ok(ModelGradients {
                batch_grad: g.iter().zip(&noise).map(|(gi, e)| gi + e * inv).collect(),
                per_example_grads: None,
                mean_loss: self.loss(theta)?,
                batch_size,
            });
        }
        let mut sum = vec![0.0; n];
        let mut rows = Vec::with_capacity(batch_size * n);
        let mut z = vec![0.0; n];
        for _ in 0..batch_size {
            z.iter_mut().for_each(|v| *v = rng::standard_normal(rng));
            let noise = self.noise_factor.matvec(&z)?;
            for i in 0..n {
                let gi = g[i] + noise[i];
                sum[i] += gi;
                rows.push(gi);
            }
        }
        let inv = 1.0 / batch_size as f64;
        Ok(ModelGradients {
            batch_grad: sum.iter().map(|v| v * inv).collect(),
            per_example_grads: Some(Matrix::new(batch_size, n, rows)?),
            mean_loss: self.loss(theta)?,
            batch_size,
        })
    }

    /// Exact `B_noise` and `B_simple` at `theta`.
    pub fn true_noise_scale(&self, theta: &[f64]) -> Result<NoiseScales> {
        let g = self.nonzero_gradient(theta)?;
        let ghg = numcore::dot(&g, &self.hessian.matvec(&g)?);
        Ok(NoiseScales {
            b_noise: self.trace_h_sigma() / ghg,
            b_simple: self.noise_cov.trace() / numcore::norm_sq(&g),
        })
    }
}

fn check_square(m: &Matrix, dim: usize, what: &str) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::Shape(format!(
            "{what} must be {dim}x{dim}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_spec(dim: usize) -> QuadraticSpec {
        QuadraticSpec::new(Matrix::identity(dim), Matrix::identity(dim), vec![0.0; dim], 1).unwrap()
    }

    #[test]
    fn zero_noise_gives_exact_gradients() {
        let h = Matrix::diag(&[1.0, 4.0]).unwrap();
        let spec = QuadraticSpec::new(h, Matrix::diag(&[0.0, 0.0]).unwrap(), vec![1.0, -1.0], 0)
            .unwrap();
        let mut r = rng::seeded(0);
        let g = spec.sample_grads(&[2.0, 1.0], 5, &mut r, true).unwrap();
        let rows = g.per_example_grads.unwrap();
        for i in 0..5 {
            assert_eq!(rows.row(i), &[1.0, 8.0]);
        }
        assert_eq!(g.batch_grad, vec![1.0, 8.0]);
        let at_min = spec.sample_grads(&[1.0, -1.0], 3, &mut r, false).unwrap();
        assert_eq!(at_min.batch_grad, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_closed_form() {
        let spec = identity_spec(2);
        let s = spec.true_noise_scale(&[3.0, 4.0]).unwrap();
        assert_eq!(s.b_noise, 2.0 / 25.0);
        assert_eq!(s.b_simple, 2.0 / 25.0);
        assert_eq!(spec.eps_max(&[3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn noiseless_scales_are_zero() {
        let spec = QuadraticSpec::new(
            Matrix::diag(&[1.0, 3.0]).unwrap(),
            Matrix::zeros(2, 2),
            vec![0.0, 0.0],
            0,
        )
        .unwrap();
        let s = spec.true_noise_scale(&[1.0, 1.0]).unwrap();
        assert_eq!((s.b_noise, s.b_simple), (0.0, 0.0));
    }

    #[test]
    fn diagonal_case_by_hand() {
        // H = diag(1,4), Σ = 2I, θ − c = (1,1): G = (1,4),
        // tr(HΣ) = 10, GᵀHG = 1 + 64 = 65, tr(Σ) = 4, |G|² = 17.
        let spec = QuadraticSpec::new(
            Matrix::diag(&[1.0, 4.0]).unwrap(),
            Matrix::diag(&[2.0, 2.0]).unwrap(),
            vec![0.0, 0.0],
            0,
        )
        .unwrap();
        let s = spec.true_noise_scale(&[1.0, 1.0]).unwrap();
        assert!((s.b_noise - 10.0 / 65.0).abs() < 1e-15);
        assert!((s.b_simple - 4.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn minimizer_is_degenerate() {
        let spec = identity_spec(3);
        assert!(matches!(
            spec.true_noise_scale(&[0.0; 3]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn rejects_bad_matrices() {
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(QuadraticSpec::new(asym, Matrix::identity(2), vec![0.0; 2], 0).is_err());
        let indefinite = Matrix::diag(&[1.0, -1.0]).unwrap();
        assert!(QuadraticSpec::new(indefinite.clone(), Matrix::identity(2), vec![0.0; 2], 0).is_err());
        assert!(QuadraticSpec::new(Matrix::identity(2), indefinite, vec![0.0; 2], 0).is_err());
        assert!(QuadraticSpec::new(Matrix::identity(3), Matrix::identity(2), vec![0.0; 3], 0).is_err());
    }

    #[test]
    fn semidefinite_noise_uses_eigen_factor() {
        let cov = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let spec = QuadraticSpec::new(Matrix::identity(2), cov, vec![0.0; 2], 0).unwrap();
        let mut r = rng::seeded(3);
        let g = spec.sample_grads(&[1.0, 1.0], 4, &mut r, true).unwrap();
        // noise lies along (1,1), so both components move together
        for row in 0..4 {
            let v = g.per_example_grads.as_ref().unwrap().row(row);
            assert!((v[0] - v[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn parses_file_format() {
        let text = "dim = 2\nhessian = 1 0 0 4\nnoise_cov = 2 0 0 2\ncenter = 0 0\ntheta = 1 1\nseed = 9\n";
        let (spec, theta) = QuadraticSpec::parse(text).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.seed(), 9);
        assert_eq!(theta, Some(vec![1.0, 1.0]));
        let factor = "dim = 1\nhessian = 2\nnoise_factor = 3\n";
        let (spec, theta) = QuadraticSpec::parse(factor).unwrap();
        assert_eq!(spec.noise_cov().data(), &[9.0]);
        assert_eq!(spec.center(), &[0.0]);
        assert_eq!(theta, None);
        assert!(QuadraticSpec::parse("dim = 2\nhessian = 1 0 0\nnoise_cov = 1 0 0 1\n").is_err());
        assert!(QuadraticSpec::parse("dim = 1\nhessian = 1\n").is_err());
    }

    #[test]
    fn monte_carlo_mean_is_true_gradient() {
        let spec = identity_spec(2);
        let mut r = rng::seeded(42);
        let draws = 100_000;
        let mut mean = [0.0; 2];
        for _ in 0..draws {
            let g = spec.sample_grads(&[3.0, 4.0], 1, &mut r, false).unwrap();
            mean[0] += g.batch_grad[0];
            mean[1] += g.batch_grad[1];
        }
        let se = 1.0 / (draws as f64).sqrt();
        assert!((mean[0] / draws as f64 - 3.0).abs() < 3.0 * se);
        assert!((mean[1] / draws as f64 - 4.0).abs() < 3.0 * se);
    }
}
