use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numcore::{matmul, Matrix};
use crate::rng;

/// Fixed random two-layer projection `W₂ · tanh(W₁x + b₁)`.
///
/// Weights are drawn once from the seed and never trained; the map stands in
/// for a pretrained image encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedder {
    w1_t: Matrix,
    b1: Vec<f64>,
    w2_t: Matrix,
}

impl Embedder {
    pub fn new(input_dim: usize, hidden: usize, dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || dim == 0 {
            return Err(Error::Config("embedder dimensions must be positive".into()));
        }
        let mut r = rng::stream(seed, 0xE4BE);
        let l1 = (3.0 / input_dim as f64).sqrt();
        let l2 = (3.0 / hidden as f64).sqrt();
        let w1_t = Matrix::new(
            input_dim,
            hidden,
            (0..input_dim * hidden).map(|_| r.random_range(-l1..l1)).collect(),
        )?;
        let b1 = (0..hidden).map(|_| r.random_range(-0.5..0.5)).collect();
        let w2_t = Matrix::new(
            hidden,
            dim,
            (0..hidden * dim).map(|_| r.random_range(-l2..l2)).collect(),
        )?;
        Ok(Self { w1_t, b1, w2_t })
    }

    pub fn dim(&self) -> usize {
        self.w2_t.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w1_t.rows()
    }

    /// One embedding row per image row.
    pub fn embed(&self, images: &Matrix) -> Result<Matrix> {
        if images.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "embedder expects {} pixels, images have {}",
                self.input_dim(),
                images.cols()
            )));
        }
        let pre = matmul(images, &self.w1_t)?;
        let hidden = self.b1.len();
        let act: Vec<f64> = pre
            .data()
            .iter()
            .enumerate()
            .map(|(i, z)| (z + self.b1[i % hidden]).tanh())
            .collect();
        matmul(&Matrix::new(images.rows(), hidden, act)?, &self.w2_t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let e = Embedder::new(16, 32, 5, 3).unwrap();
        let img = Matrix::new(3, 16, [0.25; 16].repeat(3)).unwrap();
        let out = e.embed(&img).unwrap();
        assert_eq!(out.shape(), (3, 5));
        assert_eq!(out.row(0), out.row(2));
        assert_eq!(Embedder::new(16, 32, 5, 3).unwrap().embed(&img).unwrap(), out);
        assert_ne!(Embedder::new(16, 32, 5, 4).unwrap().embed(&img).unwrap(), out);
        assert!(e.embed(&Matrix::zeros(1, 15)).is_err());
    }
}
