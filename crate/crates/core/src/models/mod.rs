//! Trainable objects: an MLP classifier and the analytic noisy quadratic.

mod mlp;
mod quadratic;

pub use mlp::{Activation, Mlp, MlpSpec};
pub use quadratic::{NoiseScales, QuadraticSpec};

use crate::numcore::Matrix;

/// Loss and gradients for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    /// Mean gradient over the batch.
    pub batch_grad: Vec<f64>,
    /// One row per example when requested.
    pub per_example_grads: Option<Matrix>,
    pub mean_loss: f64,
    pub batch_size: usize,
}

impl ModelGradients {
    pub fn grad_norm_sq(&self) -> f64 {
        crate::numcore::norm_sq(&self.batch_grad)
    }
}

impl ModelGradients {
    /// Gradients of the union of two disjoint batches, weighted by size.
    ///
    /// Per-example rows are kept only when both sides carry them.
    pub fn combine(&self, other: &ModelGradients) -> crate::Result<ModelGradients> {
        if self.batch_grad.len() != other.batch_grad.len() {
            return Err(crate::Error::Shape(format!(
                "cannot combine gradients of length {} and {}",
                self.batch_grad.len(),
                other.batch_grad.len()
            )));
        }
        let (na, nb) = (self.batch_size as f64, other.batch_size as f64);
        let n = na + nb;
        let batch_grad = self
            .batch_grad
            .iter()
            .zip(&other.batch_grad)
            .map(|(a, b)| (na * a + nb * b) / n)
            .collect();
        let per_example_grads = match (&self.per_example_grads, &other.per_example_grads) {
            (Some(a), Some(b)) => {
                let mut rows = a.data().to_vec();
                rows.extend_from_slice(b.data());
                Some(Matrix::new(a.rows() + b.rows(), a.cols(), rows)?)
            }
            _ => None,
        };
        Ok(ModelGradients {
            batch_grad,
            per_example_grads,
            mean_loss: (na * self.mean_loss + nb * other.mean_loss) / n,
            batch_size: self.batch_size + other.batch_size,
        })
    }
}
