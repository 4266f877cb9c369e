//! Pixel-level augmentation transforms.
//!
//! Images are grayscale, row-major, with pixel values in `[0, 1]`. Every
//! transform at magnitude 0 returns its input unchanged bit for bit, and every
//! output is clamped to `[0, 1]`.
//!
//! | transform         | rule at magnitude `m`                                     |
//! |-------------------|-----------------------------------------------------------|
//! | `horizontal_flip` | mirror columns when `m > 0`                               |
//! | `rotate`          | rotate by `m · 30°` about the center, bilinear, zero fill |
//! | `brightness`      | `p + 0.5·m`                                               |
//! | `contrast`        | `μ + (1 + m)(p − μ)`, `μ` the image mean                  |
//! | `gaussian_noise`  | `p + 0.25·m·z`, `z` standard normal from a seeded stream  |
//! | `zoom`            | zoom in by `1 + m` about the center, bilinear             |

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::rng::{self, standard_normal};

pub const BRIGHTNESS_SCALE: f64 = 0.5;
pub const NOISE_SCALE: f64 = 0.25;
pub const MAX_ROTATION_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transform {
    HorizontalFlip,
    Rotate,
    Brightness,
    Contrast,
    GaussianNoise,
    Zoom,
}

impl Transform {
    pub const CATALOG: [Transform; 6] = [
        Transform::HorizontalFlip,
        Transform::Rotate,
        Transform::Brightness,
        Transform::Contrast,
        Transform::GaussianNoise,
        Transform::Zoom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::HorizontalFlip => "horizontal_flip",
            Transform::Rotate => "rotate",
            Transform::Brightness => "brightness",
            Transform::Contrast => "contrast",
            Transform::GaussianNoise => "gaussian_noise",
            Transform::Zoom => "zoom",
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::CATALOG
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Catalog(s.to_string()))
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Transform {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// One point of the augmentation search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformTuple {
    pub transform: Transform,
    pub magnitude: f64,
}

impl TransformTuple {
    pub fn new(transform: Transform, magnitude: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::Config(format!(
                "magnitude must be in [0, 1], got {magnitude}"
            )));
        }
        Ok(Self {
            transform,
            magnitude,
        })
    }

    /// Cartesian product of `transforms` and `magnitudes`, transform-major.
    pub fn grid(transforms: &[Transform], magnitudes: &[f64]) -> Result<Vec<Self>> {
        transforms
            .iter()
            .flat_map(|&t| magnitudes.iter().map(move |&m| Self::new(t, m)))
            .collect()
    }
}

impl fmt::Display for TransformTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.transform, self.magnitude)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    /// Square shape for `pixels`, if `pixels` is a perfect square.
    pub fn square(pixels: usize) -> Result<Self> {
        let side = (pixels as f64).sqrt().round() as usize;
        if side * side != pixels || side == 0 {
            return Err(Error::Shape(format!(
                "{pixels} pixels do not form a square image; give the height explicitly"
            )));
        }
        Ok(Self {
            height: side,
            width: side,
        })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Applies `tuple` to every image (row) of `images`.
///
/// `noise_seed` drives `gaussian_noise`; image `i` draws from stream `i`, so
/// the noise pattern is shared across magnitudes.
pub fn apply_transform(
    tuple: TransformTuple,
    images: &Matrix,
    shape: ImageShape,
    noise_seed: u64,
) -> Result<Matrix> {
    if images.cols() != shape.pixels() {
        return Err(Error::Shape(format!(
            "images have {} pixels, shape {}x{} needs {}",
            images.cols(),
            shape.height,
            shape.width,
            shape.pixels()
        )));
    }
    if let Some(v) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Data(format!("pixel value {v} outside [0, 1]")));
    }
    let m = tuple.magnitude;
    if m == 0.0 {
        return Ok(images.clone());
    }
    let mut out = Vec::with_capacity(images.data().len());
    for i in 0..images.rows() {
        let img = images.row(i);
        let transformed = match tuple.transform {
            Transform::HorizontalFlip => flip(img, shape),
            Transform::Rotate => rotate(img, shape, (m * MAX_ROTATION_DEG).to_radians()),
            Transform::Brightness => img.iter().map(|p| p + BRIGHTNESS_SCALE * m).collect(),
            Transform::Contrast => {
                let mean = img.iter().sum::<f64>() / img.len() as f64;
                img.iter().map(|p| mean + (1.0 + m) * (p - mean)).collect()
            }
            Transform::GaussianNoise => {
                let mut r = rng::stream(noise_seed, i as u64);
                img.iter()
                    .map(|p| p + NOISE_SCALE * m * standard_normal(&mut r))
                    .collect()
            }
            Transform::Zoom => zoom(img, shape, 1.0 + m),
        };
        out.extend(transformed.into_iter().map(|p: f64| p.clamp(0.0, 1.0)));
    }
    Matrix::new(images.rows(), images.cols(), out)
}

fn flip(img: &[f64], shape: ImageShape) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.len());
    for y in 0..shape.height {
        let row = &img[y * shape.width..(y + 1) * shape.width];
        out.extend(row.iter().rev());
    }
    out
}

/// Bilinear sample with zero outside the image.
fn sample(img: &[f64], shape: ImageShape, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let at = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= shape.width as f64 || yi >= shape.height as f64 {
            0.0
        } else {
            img[yi as usize * shape.width + xi as usize]
        }
    };
    at(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + at(x0 + 1.0, y0) * fx * (1.0 - fy)
        + at(x0, y0 + 1.0) * (1.0 - fx) * fy
        + at(x0 + 1.0, y0 + 1.0) * fx * fy
}

/// Maps every output pixel through `src` to a source coordinate.
fn resample(img: &[f64], shape: ImageShape, src: impl Fn(f64, f64) -> (f64, f64)) -> Vec<f64> {
    let cx = (shape.width as f64 - 1.0) / 2.0;
    let cy = (shape.height as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(img.len());
    for y in 0..shape.height {
        for x in 0..shape.width {
            let (dx, dy) = src(x as f64 - cx, y as f64 - cy);
            out.push(sample(img, shape, dx + cx, dy + cy));
        }
    }
    out
}

fn rotate(img: &[f64], shape: ImageShape, angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    // inverse rotation finds the source of each output pixel
    resample(img, shape, |dx, dy| (c * dx + s * dy, -s * dx + c * dy))
}

fn zoom(img: &[f64], shape: ImageShape, factor: f64) -> Vec<f64> {
    resample(img, shape, |dx, dy| (dx / factor, dy / factor))
}
