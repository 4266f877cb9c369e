use crate::error::{Error, Result};
use crate::numcore::{matmul, sqrtm_psd, symmetric_eigen, Matrix};

const SQRT_TOL: f64 = 1e-8;

/// Mean and covariance of a set of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub sample_count: usize,
}

impl GaussianSummary {
    /// Sample mean and unbiased covariance of the rows of `samples`.
    pub fn fit(samples: &Matrix) -> Result<Self> {
        let (n, k) = samples.shape();
        if n < k + 1 {
            return Err(Error::Data(format!(
                "fitting a {k}-dimensional covariance needs at least {} samples, got {n}",
                k + 1
            )));
        }
        let mut mean = vec![0.0; k];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(samples.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; k * k];
        for r in 0..n {
            let row = samples.row(r);
            for i in 0..k {
                let di = row[i] - mean[i];
                for j in i..k {
                    cov[i * k + j] += di * (row[j] - mean[j]);
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..k {
            for j in i..k {
                let v = cov[i * k + j] / denom;
                cov[i * k + j] = v;
                cov[j * k + i] = v;
            }
        }
        Ok(Self {
            mean,
            cov: Matrix::new(k, k, cov)?,
            sample_count: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fréchet distance between two Gaussians,
/// `|μa − μb|² + tr(Ca + Cb − 2(Ca·Cb)^½)`.
///
/// The cross term uses `tr((Ca·Cb)^½) = tr((√Ca·Cb·√Ca)^½)`, whose argument is
/// symmetric PSD.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() || a.cov.shape() != b.cov.shape() {
        return Err(Error::Shape(format!(
            "summaries have dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.mean == b.mean && a.cov == b.cov {
        return Ok(0.0);
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y).powi(2)).sum();
    let root_a = sqrtm_psd(&a.cov, SQRT_TOL)?;
    let inner = matmul(&matmul(&root_a, &b.cov)?, &root_a)?;
    let eig = symmetric_eigen(&inner)?;
    let cross: f64 = eig.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    if !d.is_finite() {
        return Err(Error::Numeric("Fréchet distance is not finite".into()));
    }
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(mean: f64, var: f64) -> GaussianSummary {
        GaussianSummary {
            mean: vec![mean],
            cov: Matrix::new(1, 1, vec![var]).unwrap(),
            sample_count: 10,
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        assert!((frechet_distance(&one_d(0.0, 1.0), &one_d(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-9);
        assert!((frechet_distance(&one_d(0.0, 1.0), &one_d(1.0, 4.0)).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(frechet_distance(&one_d(0.3, 2.0), &one_d(0.3, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn fit_moments() {
        let s = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 1.0], vec![4.0, 4.0]]).unwrap();
        let g = GaussianSummary::fit(&s).unwrap();
        assert_eq!(g.mean, vec![2.0, 2.0]);
        assert_eq!(g.cov.data(), &[4.0, 3.0, 3.0, 3.0]);
        assert!(GaussianSummary::fit(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let a = one_d(0.0, 1.0);
        let b = GaussianSummary {
            mean: vec![0.0, 0.0],
            cov: Matrix::identity(2),
            sample_count: 3,
        };
        assert!(matches!(frechet_distance(&a, &b), Err(Error::Shape(_))));
    }
}
