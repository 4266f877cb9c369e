use super::{shuffle_epoch, Dataset};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::rng::{self, standard_normal};

/// Gaussian class blobs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    /// Standard deviation of the class centers around the origin.
    pub separation: f64,
    /// Within-class standard deviation.
    pub spread: f64,
    /// Size of the largest class over the smallest; 1 is balanced.
    pub imbalance: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 2,
            classes: 2,
            separation: 3.0,
            spread: 1.0,
            imbalance: 1.0,
            seed: 0,
        }
    }
}

/// Class sizes geometric in the class index, summing to `n`.
fn class_counts(n: usize, classes: usize, imbalance: f64) -> Vec<usize> {
    let weights: Vec<f64> = (0..classes)
        .map(|k| {
            if classes == 1 {
                1.0
            } else {
                imbalance.powf(-(k as f64) / (classes - 1) as f64)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| ((w / total) * n as f64).floor().max(1.0) as usize)
        .collect();
    // hand the rounding remainder to the largest class
    let assigned: usize = counts.iter().sum();
    if assigned < n {
        counts[0] += n - assigned;
    } else {
        let mut excess = assigned - n;
        for c in counts.iter_mut() {
            let take = excess.min(c.saturating_sub(1));
            *c -= take;
            excess -= take;
        }
    }
    counts
}

pub fn make_blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.classes < 2 || spec.dim == 0 || spec.n < spec.classes {
        return Err(Error::Config(format!(
            "blobs need >= 2 classes, dim >= 1 and at least one example per class (got {spec:?})"
        )));
    }
    if !(spec.imbalance >= 1.0 && spec.spread >= 0.0 && spec.separation >= 0.0) {
        return Err(Error::Config(
            "imbalance must be >= 1 and spreads nonnegative".into(),
        ));
    }
    let mut centers_rng = rng::stream(spec.seed, 1);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| spec.separation * standard_normal(&mut centers_rng))
                .collect()
        })
        .collect();
    let counts = class_counts(spec.n, spec.classes, spec.imbalance);
    let mut sample_rng = rng::stream(spec.seed, 2);
    let mut rows = Vec::with_capacity(spec.n * spec.dim);
    let mut labels = Vec::with_capacity(spec.n);
    for (k, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            for c in &centers[k] {
                rows.push(c + spec.spread * standard_normal(&mut sample_rng));
            }
            labels.push(k);
        }
    }
    let ordered = Dataset::new("blobs", Matrix::new(spec.n, spec.dim, rows)?, Some(labels), Some(spec.classes))?;
    let perm = shuffle_epoch(spec.n, &mut rng::stream(spec.seed, 3));
    let (x, y) = ordered.gather(&perm);
    Dataset::new("blobs", x, Some(y), Some(spec.classes))
}

/// `n` grayscale `side × side` images in `[0, 1]`, flattened row-major.
///
/// Each image is a sum of a few Gaussian bumps at random positions on a dim
/// background, which gives transforms such as flips and rotations visible
/// structure to act on.
pub fn make_images(n: usize, side: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || side < 2 {
        return Err(Error::Config(format!("need n >= 1 and side >= 2, got n={n}, side={side}")));
    }
    use rand::Rng as _;
    let mut r = rng::stream(seed, 4);
    let mut data = Vec::with_capacity(n * side * side);
    let s = side as f64;
    for _ in 0..n {
        let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    r.random_range(0.0..s),
                    r.random_range(0.0..s),
                    r.random_range(0.08 * s..0.3 * s),
                    r.random_range(0.3..0.8),
                )
            })
            .collect();
        let background = r.random_range(0.0..0.2);
        for y in 0..side {
            for x in 0..side {
                let v: f64 = bumps
                    .iter()
                    .map(|&(cx, cy, w, a)| {
                        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                        a * (-d2 / (2.0 * w * w)).exp()
                    })
                    .sum::<f64>()
                    + background;
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Dataset::new("images", Matrix::new(n, side * side, data)?, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_shape_and_balance() {
        let d = make_blobs(&BlobSpec {
            n: 300,
            classes: 3,
            dim: 4,
            ..Default::default()
        })
        .unwrap();
        assert_eq!((d.len(), d.dim(), d.num_classes()), (300, 4, 3));
        let mut counts = [0; 3];
        d.labels().unwrap().iter().for_each(|&y| counts[y] += 1);
        assert_eq!(counts, [100, 100, 100]);
    }

    #[test]
    fn imbalance_ratio() {
        let counts = class_counts(1000, 2, 4.0);
        assert_eq!(counts.iter().sum::<usize>(), 1000);
        assert_eq!(counts, vec![800, 200]);
        let counts = class_counts(5, 4, 100.0);
        assert_eq!(counts.iter().sum::<usize>(), 5);
        assert!(counts.iter().all(|&c| c >= 1));
    }

    #[test]
    fn blobs_are_seeded() {
        let spec = BlobSpec::default();
        assert_eq!(make_blobs(&spec).unwrap(), make_blobs(&spec).unwrap());
        let other = BlobSpec { seed: 1, ..spec.clone() };
        assert_ne!(make_blobs(&spec).unwrap(), make_blobs(&other).unwrap());
        assert!(make_blobs(&BlobSpec { classes: 1, ..spec }).is_err());
    }

    #[test]
    fn images_in_unit_range() {
        let d = make_images(5, 8, 3).unwrap();
        assert_eq!((d.len(), d.dim()), (5, 64));
        assert!(d.features().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
