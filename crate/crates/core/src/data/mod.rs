//! Datasets, synthetic generators, shuffling and batching.

mod batching;
mod io;
mod synthetic;

pub use batching::{make_batches, shuffle_epoch, Batch};
pub use io::{load_dataset, write_csv, write_raw_f64, DataFormat, LoadOptions};
pub use synthetic::{make_blobs, make_images, BlobSpec};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Feature rows with optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Matrix,
    labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl Dataset {
    /// `num_classes` defaults to one more than the largest label.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Option<Vec<usize>>,
        num_classes: Option<usize>,
    ) -> Result<Self> {
        let n = features.rows();
        let mut classes = 0;
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Data(format!(
                    "{n} feature rows but {} labels",
                    labels.len()
                )));
            }
            let max = labels.iter().copied().max().unwrap_or(0);
            classes = num_classes.unwrap_or(max + 1);
            if max >= classes {
                return Err(Error::Data(format!(
                    "label {max} out of range for {classes} classes"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            num_classes: classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Zero for unlabeled data.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Rows `idx` as a feature matrix and label vector. Unlabeled data yields
    /// an empty label vector.
    pub fn gather(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let x = self.features.select_rows(idx);
        let y = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect())
            .unwrap_or_default();
        (x, y)
    }

    /// First `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        if n == 0 || n >= self.len() {
            return Err(Error::Config(format!(
                "split point {n} must leave both parts nonempty (dataset has {} rows)",
                self.len()
            )));
        }
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        let part = |idx: &[usize], suffix: &str| {
            let (x, y) = self.gather(idx);
            Dataset::new(
                format!("{}-{suffix}", self.name),
                x,
                self.labels.as_ref().map(|_| y),
                Some(self.num_classes.max(1)),
            )
        };
        Ok((part(&head, "train")?, part(&tail, "val")?))
    }

    /// Copies row 0 `n` times.
    pub fn repeat_first(&self, n: usize) -> Result<Dataset> {
        let idx = vec![0; n];
        let (x, y) = self.gather(&idx);
        Dataset::new(
            format!("{}-dup", self.name),
            x,
            self.labels.as_ref().map(|_| y),
            Some(self.num_classes.max(1)),
        )
    }
}
