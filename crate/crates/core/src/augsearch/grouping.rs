use serde::Serialize;

use super::TransformTuple;
use crate::error::{Error, Result};

/// Tuples whose distances fall in one band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformGroup {
    pub id: usize,
    /// Smallest and largest member distance.
    pub band: (f64, f64),
    pub members: Vec<TransformTuple>,
    /// Member at the middle of the band, offered as the group's stand-in.
    pub representative: TransformTuple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grouping {
    pub groups: Vec<TransformGroup>,
    /// Fewer groups than requested, because of tied distances.
    pub fewer_groups: bool,
}

/// Equal-frequency bands over the sorted distances.
///
/// Cut points sit at `g·n/k` and move forward past ties, so equal distances
/// always share a group and band intervals never overlap.
pub fn group_tuples(
    tuples: &[TransformTuple],
    distances: &[f64],
    num_groups: usize,
) -> Result<Grouping> {
    if tuples.len() != distances.len() {
        return Err(Error::Shape(format!(
            "{} tuples but {} distances",
            tuples.len(),
            distances.len()
        )));
    }
    if num_groups == 0 {
        return Err(Error::Config("num_groups must be at least 1".into()));
    }
    if tuples.is_empty() {
        return Err(Error::Config("no tuples to group".into()));
    }
    if let Some(d) = distances.iter().find(|d| !d.is_finite()) {
        return Err(Error::Numeric(format!("distance {d} is not finite")));
    }
    let n = tuples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| distances[i]).collect();

    let mut cuts = vec![0];
    for g in 1..num_groups {
        let mut p = (g * n + num_groups / 2) / num_groups;
        while p > 0 && p < n && sorted[p] == sorted[p - 1] {
            p += 1;
        }
        if p < n && p > *cuts.last().unwrap() {
            cuts.push(p);
        }
    }
    cuts.push(n);

    let groups: Vec<TransformGroup> = cuts
        .windows(2)
        .enumerate()
        .map(|(id, w)| {
            let idx = &order[w[0]..w[1]];
            TransformGroup {
                id,
                band: (sorted[w[0]], sorted[w[1] - 1]),
                members: idx.iter().map(|&i| tuples[i]).collect(),
                representative: tuples[idx[idx.len() / 2]],
            }
        })
        .collect();
    Ok(Grouping {
        fewer_groups: groups.len() < num_groups,
        groups,
    })
}
