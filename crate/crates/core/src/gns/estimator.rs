use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ModelGradients;
use crate::numcore::{norm_sq, Matrix};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_WARMUP: usize = 50;

/// The two batch sizes of the paired estimator. `b_big` is a multiple of
/// `b_small`; the small batch is the leading slice of the big one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairedBatchConfig {
    b_small: usize,
    b_big: usize,
}

impl PairedBatchConfig {
    pub fn new(b_small: usize, b_big: usize) -> Result<Self> {
        if b_small == 0 {
            return Err(Error::Config("b_small must be at least 1".into()));
        }
        if b_small >= b_big {
            return Err(Error::Config(format!(
                "b_small ({b_small}) must be smaller than b_big ({b_big})"
            )));
        }
        if !b_big.is_multiple_of(b_small) {
            return Err(Error::Config(format!(
                "b_big ({b_big}) must be a multiple of b_small ({b_small})"
            )));
        }
        Ok(Self { b_small, b_big })
    }

    pub fn b_small(&self) -> usize {
        self.b_small
    }

    pub fn b_big(&self) -> usize {
        self.b_big
    }
}

/// Single-iteration estimates of `|G|²` and `tr(Σ)`. Either may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedStats {
    pub rho_sq: f64,
    pub s: f64,
}

/// Unbiased `|G|²` and `tr(Σ)` estimates from gradients at two batch sizes.
pub fn paired_batch_stats(
    small: &ModelGradients,
    big: &ModelGradients,
    pair: PairedBatchConfig,
) -> Result<PairedStats> {
    if small.batch_size != pair.b_small || big.batch_size != pair.b_big {
        return Err(Error::Config(format!(
            "gradient batch sizes ({}, {}) do not match the pair ({}, {})",
            small.batch_size, big.batch_size, pair.b_small, pair.b_big
        )));
    }
    stats_from_norms(
        pair.b_small as f64,
        pair.b_big as f64,
        norm_sq(&small.batch_grad),
        norm_sq(&big.batch_grad),
    )
}

pub(crate) fn stats_from_norms(
    b_small: f64,
    b_big: f64,
    small_sq: f64,
    big_sq: f64,
) -> Result<PairedStats> {
    if b_small == b_big {
        return Err(Error::Config(
            "paired batch sizes must differ to separate signal from noise".into(),
        ));
    }
    Ok(PairedStats {
        rho_sq: (b_big * big_sq - b_small * small_sq) / (b_big - b_small),
        s: (small_sq - big_sq) / (1.0 / b_small - 1.0 / b_big),
    })
}

/// Exponential moving averages of the paired statistics.
///
/// The first observation seeds both averages; afterwards
/// `ema ← α·x + (1 − α)·ema`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnsAccumulator {
    rho_sq_ema: f64,
    s_ema: f64,
    alpha: f64,
    steps_seen: usize,
}

impl GnsAccumulator {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("EMA alpha must be in (0, 1], got {alpha}")));
        }
        Ok(Self {
            rho_sq_ema: 0.0,
            s_ema: 0.0,
            alpha,
            steps_seen: 0,
        })
    }

    pub fn update(&mut self, stats: PairedStats) {
        if self.steps_seen == 0 {
            self.rho_sq_ema = stats.rho_sq;
            self.s_ema = stats.s;
        } else {
            let a = self.alpha;
            self.rho_sq_ema = a * stats.rho_sq + (1.0 - a) * self.rho_sq_ema;
            self.s_ema = a * stats.s + (1.0 - a) * self.s_ema;
        }
        self.steps_seen += 1;
    }

    pub fn rho_sq_ema(&self) -> f64 {
        self.rho_sq_ema
    }

    pub fn s_ema(&self) -> f64 {
        self.s_ema
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps_seen(&self) -> usize {
        self.steps_seen
    }

    /// `S_EMA / |ϱ|²_EMA` once at least `warmup` updates have been seen.
    pub fn noise_scale(&self, warmup: usize) -> Result<NoiseScaleEstimate> {
        if self.steps_seen == 0 || self.steps_seen < warmup {
            return Err(Error::InsufficientSignal(format!(
                "{} of {warmup} warmup iterations seen; run more steps before reading the noise scale",
                self.steps_seen
            )));
        }
        if self.rho_sq_ema <= 0.0 {
            return Err(Error::InsufficientSignal(format!(
                "smoothed |G|^2 estimate is {:.3e} (not positive); increase warmup or b_big",
                self.rho_sq_ema
            )));
        }
        Ok(NoiseScaleEstimate {
            b_noise_hat: self.s_ema / self.rho_sq_ema,
            rho_sq: self.rho_sq_ema,
            s: self.s_ema,
            steps_used: self.steps_seen,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseScaleEstimate {
    pub b_noise_hat: f64,
    pub rho_sq: f64,
    pub s: f64,
    pub steps_used: usize,
}

/// Paired estimator plus its accumulator and warmup requirement.
#[derive(Debug, Clone)]
pub struct GnsEstimator {
    pub pair: PairedBatchConfig,
    pub acc: GnsAccumulator,
    pub warmup: usize,
}

impl GnsEstimator {
    pub fn new(pair: PairedBatchConfig, alpha: f64, warmup: usize) -> Result<Self> {
        Ok(Self {
            pair,
            acc: GnsAccumulator::new(alpha)?,
            warmup,
        })
    }

    pub fn observe(&mut self, small: &ModelGradients, big: &ModelGradients) -> Result<PairedStats> {
        let stats = paired_batch_stats(small, big, self.pair)?;
        self.acc.update(stats);
        Ok(stats)
    }

    pub fn estimate(&self) -> Result<NoiseScaleEstimate> {
        self.acc.noise_scale(self.warmup)
    }
}

/// `tr(Σ̂)/|Ḡ|²` from a full `B × P` matrix of per-example gradients, using
/// unbiased per-component sample variances.
pub fn exact_simple_noise(per_example: &Matrix) -> Result<f64> {
    let (b, p) = per_example.shape();
    if b < 2 {
        return Err(Error::Config(format!(
            "sample variance needs at least 2 examples, got {b}"
        )));
    }
    // Welford update per component, rows visited in order.
    let mut mean = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    for r in 0..b {
        let k = (r + 1) as f64;
        for (j, &x) in per_example.row(r).iter().enumerate() {
            let delta = x - mean[j];
            mean[j] += delta / k;
            m2[j] += delta * (x - mean[j]);
        }
    }
    let mean_sq = norm_sq(&mean);
    if mean_sq == 0.0 {
        return Err(Error::Degenerate(
            "mean gradient is zero; the noise scale is undefined".into(),
        ));
    }
    let trace: f64 = m2.iter().sum::<f64>() / (b - 1) as f64;
    Ok(trace / mean_sq)
}
