//! Augmentation search-space compression.
//!
//! Each `(transform, magnitude)` tuple is applied to a reference image set,
//! the results are embedded with a fixed random projection, and the Fréchet
//! distance between Gaussians fitted to the augmented and original embeddings
//! measures how far the tuple moves the data. Tuples are then bucketed into
//! distance bands, so a downstream search only needs to try one
//! representative per band instead of every tuple.

mod embed;
mod frechet;
mod grouping;
mod transforms;

pub use embed::Embedder;
pub use frechet::{frechet_distance, GaussianSummary};
pub use grouping::{group_tuples, Grouping, TransformGroup};
pub use transforms::{
    apply_transform, ImageShape, Transform, TransformTuple, BRIGHTNESS_SCALE, MAX_ROTATION_DEG,
    NOISE_SCALE,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub embed_dim: usize,
    pub embed_hidden: usize,
    pub num_groups: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            embed_dim: 8,
            embed_hidden: 64,
            num_groups: 5,
            seed: 0,
        }
    }
}

/// JSON document for one grouping run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingReport {
    pub tuples: Vec<TransformTuple>,
    pub distances: Vec<f64>,
    pub groups: Vec<TransformGroup>,
    pub fewer_groups: bool,
}

/// Distance of every tuple from the unaugmented images, then grouping.
pub fn group_search_space(
    images: &Matrix,
    shape: ImageShape,
    tuples: &[TransformTuple],
    opts: SearchOptions,
) -> Result<GroupingReport> {
    let n = images.rows();
    if n <= opts.embed_dim {
        return Err(Error::Data(format!(
            "{n} images cannot fit a {}-dimensional covariance; need at least {}",
            opts.embed_dim,
            opts.embed_dim + 1
        )));
    }
    let embedder = Embedder::new(shape.pixels(), opts.embed_hidden, opts.embed_dim, opts.seed)?;
    let reference = GaussianSummary::fit(&embedder.embed(images)?)?;
    let distances = tuples
        .iter()
        .map(|&t| {
            let augmented = apply_transform(t, images, shape, opts.seed)?;
            let summary = GaussianSummary::fit(&embedder.embed(&augmented)?)?;
            frechet_distance(&reference, &summary)
        })
        .collect::<Result<Vec<f64>>>()?;
    let grouping = group_tuples(tuples, &distances, opts.num_groups)?;
    Ok(GroupingReport {
        tuples: tuples.to_vec(),
        distances,
        groups: grouping.groups,
        fewer_groups: grouping.fewer_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_images;

    #[test]
    fn identity_grid_collapses() {
        let imgs = make_images(40, 6, 2).unwrap();
        let shape = ImageShape::square(36).unwrap();
        let tuples = TransformTuple::grid(&Transform::CATALOG, &[0.0]).unwrap();
        let r = group_search_space(imgs.features(), shape, &tuples, SearchOptions::default()).unwrap();
        assert!(r.distances.iter().all(|&d| d == 0.0));
        assert_eq!(r.groups.len(), 1);
        assert!(r.fewer_groups);
    }

    #[test]
    fn too_few_images() {
        let imgs = make_images(8, 4, 2).unwrap();
        let shape = ImageShape::square(16).unwrap();
        let tuples = TransformTuple::grid(&[Transform::Zoom], &[0.5]).unwrap();
        let err = group_search_space(imgs.features(), shape, &tuples, SearchOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("at least 9"), "{err}");
    }
}
