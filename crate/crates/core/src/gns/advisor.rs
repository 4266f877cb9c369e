use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::NoiseScaleEstimate;
use crate::error::{Error, Result};

/// Step size that maximises the expected one-step loss decrease at batch size
/// `batch`: `ε_max / (1 + B_noise/B)`.
pub fn eps_opt(eps_max: f64, b_noise: f64, batch: usize) -> f64 {
    eps_max / (1.0 + b_noise / batch as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub batch: usize,
    pub eps_opt: f64,
    /// Optimizer steps relative to the infinite-batch limit, `1 + B_noise/B`.
    pub relative_steps: f64,
    /// Examples processed relative to the `B → 0` limit, `1 + B/B_noise`.
    pub relative_examples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
    /// Set when the noise scale was not positive and the curve is flat.
    pub degenerate: bool,
}

/// Steps/examples tradeoff across a strictly increasing batch grid.
pub fn tradeoff_curve(b_noise: f64, eps_max: f64, batch_grid: &[usize]) -> Result<TradeoffCurve> {
    if batch_grid.is_empty() {
        return Err(Error::Config("batch grid is empty".into()));
    }
    if batch_grid[0] == 0 || batch_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "batch grid must be positive and strictly increasing: {batch_grid:?}"
        )));
    }
    let degenerate = b_noise.is_nan() || b_noise <= 0.0;
    let points = batch_grid
        .iter()
        .map(|&batch| {
            if degenerate {
                TradeoffPoint {
                    batch,
                    eps_opt: eps_max,
                    relative_steps: 1.0,
                    relative_examples: 1.0,
                }
            } else {
                let b = batch as f64;
                TradeoffPoint {
                    batch,
                    eps_opt: eps_opt(eps_max, b_noise, batch),
                    relative_steps: 1.0 + b_noise / b,
                    relative_examples: 1.0 + b / b_noise,
                }
            }
        })
        .collect();
    Ok(TradeoffCurve { points, degenerate })
}

/// How to turn a noise scale into a concrete batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchPolicy {
    /// Nearest power of two to the noise scale.
    Balanced,
    /// Favor wall-clock time: at least four times the noise scale.
    MinTime,
    /// Favor examples processed: at most a quarter of the noise scale.
    MinCompute,
}

impl FromStr for BatchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "min_time" => Ok(Self::MinTime),
            "min_compute" => Ok(Self::MinCompute),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected balanced, min_time or min_compute)"
            ))),
        }
    }
}

impl fmt::Display for BatchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Balanced => "balanced",
            Self::MinTime => "min_time",
            Self::MinCompute => "min_compute",
        })
    }
}

fn pow2_at_most(x: f64) -> usize {
    if x < 2.0 {
        return 1;
    }
    let mut p = 1usize;
    while p < usize::MAX / 2 && ((p * 2) as f64) <= x {
        p *= 2;
    }
    p
}

fn pow2_at_least(x: f64) -> usize {
    let mut p = 1usize;
    while p < usize::MAX / 2 && (p as f64) < x {
        p *= 2;
    }
    p
}

/// Power-of-two batch size for `policy`, clamped to `[1, hardware_cap]`.
pub fn recommend_batch(estimate: &NoiseScaleEstimate, policy: BatchPolicy, hardware_cap: usize) -> usize {
    let b = if estimate.b_noise_hat.is_finite() {
        estimate.b_noise_hat.max(0.0)
    } else {
        f64::MAX
    };
    let raw = match policy {
        BatchPolicy::Balanced => {
            let lo = pow2_at_most(b);
            let hi = pow2_at_least(b);
            if b - (lo as f64) < (hi as f64) - b {
                lo
            } else {
                hi
            }
        }
        BatchPolicy::MinTime => pow2_at_least(4.0 * b),
        BatchPolicy::MinCompute => pow2_at_most((b / 4.0).max(1.0)),
    };
    raw.clamp(1, hardware_cap.max(1))
}
