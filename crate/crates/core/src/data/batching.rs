use rand::Rng as _;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fisher-Yates permutation of `0..n`.
pub fn shuffle_epoch(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// Shorter than the requested batch size (the epoch's remainder).
    pub partial: bool,
}

/// Contiguous slices of `permutation`. The remainder is kept as a final batch
/// marked partial.
pub fn make_batches(dataset: &Dataset, batch_size: usize, permutation: &[usize]) -> Result<Vec<Batch>> {
    let n = dataset.len();
    if batch_size == 0 || batch_size > n {
        return Err(Error::Config(format!(
            "batch size {batch_size} must be between 1 and the dataset size {n}"
        )));
    }
    let mut seen = vec![false; n];
    if permutation.len() != n
        || permutation
            .iter()
            .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::Config(format!(
            "batch order is not a permutation of 0..{n}"
        )));
    }
    Ok(permutation
        .chunks(batch_size)
        .map(|c| Batch {
            indices: c.to_vec(),
            partial: c.len() < batch_size,
        })
        .collect())
}
