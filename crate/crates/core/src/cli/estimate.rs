use std::time::Instant;

use serde::Serialize;

use super::config::RunConfig;
use super::output::{write_json, WallClock};
use super::train::{check_loss, Trainer};
use crate::error::{Error, Result};
use crate::gns::{
    recommend_batch, tradeoff_csv, tradeoff_curve, GnsEstimator, GnsReport, NoiseScaleEstimate,
};
use crate::models::{NoiseScales, QuadraticSpec};
use crate::rng;

/// Analytic values printed next to a quadratic-oracle estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticOracle {
    pub b_simple: f64,
    pub b_noise: f64,
    pub eps_max: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnsRunReport {
    #[serde(flatten)]
    pub report: GnsReport,
    pub b_small: usize,
    pub b_big: usize,
    pub eps_max: f64,
    pub tradeoff_degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<QuadraticOracle>,
    pub wall_clock: WallClock,
}

pub(crate) fn check_budget(cfg: &RunConfig) -> Result<()> {
    if cfg.gns.warmup > cfg.steps || cfg.steps == 0 {
        return Err(Error::Config(format!(
            "step budget {} is below the warmup of {} iterations; use steps >= {}",
            cfg.steps,
            cfg.gns.warmup,
            cfg.gns.warmup.max(1)
        )));
    }
    Ok(())
}

/// Trains the configured MLP on batches of `b_big`, feeding every iteration's
/// nested small/big gradient pair into the estimator. The optimizer steps on
/// the big-batch gradient.
pub fn estimate_mlp(cfg: &RunConfig) -> Result<(GnsEstimator, NoiseScaleEstimate)> {
    check_budget(cfg)?;
    let pair = cfg.gns.pair;
    let (train, val) = cfg.load_split()?;
    let mut t = Trainer::new(cfg, train, val, pair.b_big())?;
    let mut est = GnsEstimator::new(pair, cfg.gns.alpha, cfg.gns.warmup)?;
    for _ in 0..cfg.steps {
        let batch = t.stream.next(&t.train, true)?;
        let (head, tail) = batch.indices.split_at(pair.b_small());
        let small = t.grads(head)?;
        let big = small.combine(&t.grads(tail)?)?;
        check_loss(big.mean_loss, t.steps_taken)?;
        est.observe(&small, &big)?;
        t.apply(&big.batch_grad)?;
    }
    let estimate = est.estimate()?;
    Ok((est, estimate))
}

/// Paired draws from the noisy quadratic at a fixed point.
pub fn estimate_quadratic(
    cfg: &RunConfig,
    spec: &QuadraticSpec,
    theta: &[f64],
) -> Result<(GnsEstimator, NoiseScaleEstimate)> {
    check_budget(cfg)?;
    let pair = cfg.gns.pair;
    let mut est = GnsEstimator::new(pair, cfg.gns.alpha, cfg.gns.warmup)?;
    let mut r = rng::stream(cfg.seed, 20);
    for _ in 0..cfg.steps {
        let small = spec.sample_grads(theta, pair.b_small(), &mut r, false)?;
        let rest = spec.sample_grads(theta, pair.b_big() - pair.b_small(), &mut r, false)?;
        let big = small.combine(&rest)?;
        est.observe(&small, &big)?;
    }
    let estimate = est.estimate()?;
    Ok((est, estimate))
}

/// Evaluation point from the quadratic file, or one unit away from the center
/// along every axis.
pub fn quadratic_point(spec: &QuadraticSpec, theta: Option<Vec<f64>>) -> Vec<f64> {
    theta.unwrap_or_else(|| spec.center().iter().map(|c| c + 1.0).collect())
}

fn power_of_two_grid(cap: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |b| b.checked_mul(2))
        .take_while(|&b| b <= cap)
        .collect()
}

/// Estimates the noise scale (on the quadratic when one is configured,
/// otherwise while training the MLP) and writes `gns.json` and
/// `tradeoff.csv`.
pub fn cmd_estimate_gns(cfg: &RunConfig) -> Result<GnsRunReport> {
    let start = Instant::now();
    let (est, estimate, eps_max, oracle) = match &cfg.quadratic {
        Some(path) => {
            let (spec, theta) = QuadraticSpec::load(path)?;
            let theta = quadratic_point(&spec, theta);
            let (est, estimate) = estimate_quadratic(cfg, &spec, &theta)?;
            let NoiseScales { b_noise, b_simple } = spec.true_noise_scale(&theta)?;
            let eps_max = spec.eps_max(&theta)?;
            let oracle = QuadraticOracle {
                b_simple,
                b_noise,
                eps_max,
                relative_error: (estimate.b_noise_hat - b_simple).abs() / b_simple.abs().max(f64::MIN_POSITIVE),
            };
            (est, estimate, cfg.gns.eps_max.unwrap_or(eps_max), Some(oracle))
        }
        None => {
            let (est, estimate) = estimate_mlp(cfg)?;
            // the configured rate is taken as optimal at b_big
            let eps_max = cfg.gns.eps_max.unwrap_or_else(|| {
                cfg.optimizer.learning_rate * (1.0 + estimate.b_noise_hat.max(0.0) / cfg.gns.pair.b_big() as f64)
            });
            (est, estimate, eps_max, None)
        }
    };
    let recommendation = recommend_batch(&estimate, cfg.gns.policy, cfg.gns.hardware_cap);
    let curve = tradeoff_curve(
        estimate.b_noise_hat,
        eps_max,
        &power_of_two_grid(cfg.gns.hardware_cap),
    )?;
    let report = GnsRunReport {
        report: GnsReport::new(&est.acc, &estimate, cfg.gns.policy, recommendation, curve.points.clone()),
        b_small: cfg.gns.pair.b_small(),
        b_big: cfg.gns.pair.b_big(),
        eps_max,
        tradeoff_degenerate: curve.degenerate,
        oracle,
        wall_clock: WallClock::since(start),
    };
    cfg.ensure_out_dir()?;
    write_json(&cfg.out_path("gns.json"), &report)?;
    std::fs::write(cfg.out_path("tradeoff.csv"), tradeoff_csv(&curve.points))?;
    Ok(report)
}
