use std::ops::Range;

use crate::error::{Error, Result};

/// A named, contiguous slice of a [`ParameterVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
}

/// Flat model parameters split into named layer segments.
///
/// Values are stored contiguously; segments index into that storage in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl ParameterVector {
    pub fn from_segments<S: Into<String>>(parts: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let mut values = Vec::new();
        let mut segments: Vec<Segment> = Vec::with_capacity(parts.len());
        for (name, vals) in parts {
            let name = name.into();
            if segments.iter().any(|s| s.name == name) {
                return Err(Error::Config(format!("duplicate segment name `{name}`")));
            }
            let start = values.len();
            values.extend(vals);
            segments.push(Segment {
                name,
                range: start..values.len(),
            });
        }
        Ok(Self { values, segments })
    }

    /// A single segment called `theta`.
    pub fn flat(values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            values,
            segments: vec![Segment {
                name: "theta".into(),
                range: 0..n,
            }],
        }
    }

    pub fn total_len(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.range.clone()])
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, got {}",
                self.values.len(),
                values.len()
            )));
        }
        Ok(Self {
            values,
            segments: self.segments.clone(),
        })
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.segments == other.segments
    }
}
