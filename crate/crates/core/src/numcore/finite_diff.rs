use super::ParameterVector;
use crate::error::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `theta`.
///
/// Component `i` is `(f(θ + h·eᵢ) − f(θ − h·eᵢ)) / 2h`. Costs `2·len` calls.
pub fn finite_diff_gradient<F>(f: F, theta: &ParameterVector, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&ParameterVector) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {h}")));
    }
    let mut probe = theta.clone();
    let mut grad = Vec::with_capacity(theta.total_len());
    for i in 0..theta.total_len() {
        let orig = theta.values()[i];
        probe.values_mut()[i] = orig + h;
        let up = f(&probe);
        probe.values_mut()[i] = orig - h;
        let down = f(&probe);
        probe.values_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "objective is not finite around parameter index {i}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `|a − b| / max(|b|, tiny)` in the L2 norm.
pub fn relative_l2_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = super::norm(b).max(1e-300);
    diff / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_zero_gradient() {
        let theta = ParameterVector::flat(vec![0.3, -1.0, 2.0]);
        let g = finite_diff_gradient(|_| 7.0, &theta, DEFAULT_FD_STEP).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn half_norm_squared() {
        let theta = ParameterVector::flat(vec![1.0, 2.0]);
        let f = |p: &ParameterVector| 0.5 * super::super::norm_sq(p.values());
        let g = finite_diff_gradient(f, &theta, 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8);
        assert!((g[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_reports_index() {
        let theta = ParameterVector::flat(vec![1.0, 1e-6]);
        let f = |p: &ParameterVector| p.values()[1].ln();
        let err = finite_diff_gradient(f, &theta, 1e-5).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
    }

    #[test]
    fn rejects_nonpositive_step() {
        let theta = ParameterVector::flat(vec![1.0]);
        assert!(finite_diff_gradient(|_| 0.0, &theta, 0.0).is_err());
        assert!(finite_diff_gradient(|_| 0.0, &theta, -1.0).is_err());
    }
}
