//! Dataset files.
//!
//! CSV: one example per row, optional non-numeric header row, integer label in
//! the last column when the data is labeled.
//!
//! raw_f64: a 16-byte header holding `N` and `dim` as little-endian `u64`,
//! followed by `N·dim` little-endian `f64` values in row-major order. The
//! format carries no labels.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    RawF64,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "raw_f64" => Ok(Self::RawF64),
            other => Err(Error::Config(format!(
                "unknown data format `{other}` (expected csv or raw_f64)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// Last CSV column is a class label.
    pub labeled: bool,
    /// Rescale every feature column to `[0, 1]`.
    pub normalize: bool,
    pub num_classes: Option<usize>,
}

pub fn load_dataset(path: &Path, format: DataFormat, opts: LoadOptions) -> Result<Dataset> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let (features, labels) = match format {
        DataFormat::Csv => parse_csv(&fs::read_to_string(path)?, opts.labeled)?,
        DataFormat::RawF64 => {
            if opts.labeled {
                return Err(Error::Config("raw_f64 files carry no labels".into()));
            }
            (parse_raw(&fs::read(path)?)?, None)
        }
    };
    let features = if opts.normalize {
        min_max_normalize(&features)?
    } else {
        features
    };
    Dataset::new(name, features, labels, opts.num_classes)
}

fn parse_csv(text: &str, labeled: bool) -> Result<(Matrix, Option<Vec<usize>>)> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows == 0 && width.is_none() && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            // header
            width = Some(cells.len());
            continue;
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        let n_feat = if labeled { cells.len() - 1 } else { cells.len() };
        if n_feat == 0 {
            return Err(Error::Parse {
                line: line_no,
                msg: "row has no feature columns".into(),
            });
        }
        for c in &cells[..n_feat] {
            let v: f64 = c.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("`{c}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value `{c}`"),
                });
            }
            data.push(v);
        }
        if labeled {
            let c = cells[n_feat];
            labels.push(c.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("label `{c}` is not a non-negative integer"),
            })?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            msg: "no data rows".into(),
        });
    }
    let cols = data.len() / rows;
    Ok((Matrix::new(rows, cols, data)?, labeled.then_some(labels)))
}

fn parse_raw(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 16 {
        return Err(Error::Data(format!(
            "raw_f64 header needs 16 bytes, file has {}",
            bytes.len()
        )));
    }
    let n = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| Error::Data(format!("raw_f64 header N={n}, dim={dim} overflows")))?;
    if n == 0 || dim == 0 {
        return Err(Error::Data(format!("raw_f64 header has N={n}, dim={dim}")));
    }
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "raw_f64 with N={n}, dim={dim} needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::new(n, dim, data)
}

fn min_max_normalize(m: &Matrix) -> Result<Matrix> {
    let (rows, cols) = m.shape();
    let mut lo = vec![f64::INFINITY; cols];
    let mut hi = vec![f64::NEG_INFINITY; cols];
    for r in 0..rows {
        for (c, &v) in m.row(r).iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let mut data = m.data().to_vec();
    for r in 0..rows {
        for c in 0..cols {
            let span = hi[c] - lo[c];
            let v = &mut data[r * cols + c];
            *v = if span > 0.0 { (*v - lo[c]) / span } else { 0.0 };
        }
    }
    Matrix::new(rows, cols, data)
}

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let f = dataset.features();
    for r in 0..dataset.len() {
        let mut cells: Vec<String> = f.row(r).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = dataset.labels() {
            cells.push(labels[r].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_raw_f64(features: &Matrix, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&(features.rows() as u64).to_le_bytes())?;
    file.write_all(&(features.cols() as u64).to_le_bytes())?;
    for v in features.data() {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
