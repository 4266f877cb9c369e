use std::collections::VecDeque;
use std::time::Instant;

use serde::Serialize;

use super::config::{GridEntry, LrRule, RunConfig};
use super::estimate::estimate_mlp;
use super::output::{write_json, WallClock};
use super::train::Trainer;
use crate::error::{Error, Result};
use crate::gns::{eps_opt, recommend_batch};

pub const PROXY_NOTE: &str = "efficiency is compared in optimizer steps to reach the target \
validation loss; wall-clock speedups from large batches need parallel hardware and are not \
measured here";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub batch: usize,
    pub learning_rate: f64,
    pub converged: bool,
    /// Optimizer steps until the moving mean of validation loss reached the
    /// target.
    pub steps: Option<usize>,
    pub examples: Option<usize>,
    pub final_val_loss: f64,
    /// Steps relative to the first row.
    pub steps_vs_baseline: Option<f64>,
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub note: &'static str,
    pub lr_rule: String,
    pub target_loss: f64,
    pub b_noise_hat: Option<f64>,
    pub recommended_batch: Option<usize>,
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

/// Learning rate for `batch` given the rate `base_lr` at `base_batch`:
/// `ε_opt(B)` with `ε_max = base_lr · (1 + B_noise/B₀)`.
pub fn scaled_learning_rate(base_lr: f64, base_batch: usize, b_noise: f64, batch: usize) -> f64 {
    let b_noise = b_noise.max(0.0);
    let eps_max = base_lr * (1.0 + b_noise / base_batch as f64);
    eps_opt(eps_max, b_noise, batch)
}

struct RunOutcome {
    steps: Option<usize>,
    final_val_loss: f64,
}

/// Trains from scratch at `batch` until the moving mean of the last
/// `patience` validation losses is at or below `target`, or the budget runs
/// out.
fn run_to_target(cfg: &RunConfig, batch: usize, lr: f64, target: f64) -> Result<RunOutcome> {
    let mut run_cfg = cfg.clone();
    run_cfg.optimizer.learning_rate = lr;
    run_cfg.optimizer.validate()?;
    let (train, val) = run_cfg.load_split()?;
    let mut t = Trainer::new(&run_cfg, train, val, batch)?;
    let patience = cfg.sweep.patience;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(patience);
    let mut last_val = t.evaluate_val()?.0;
    while t.steps_taken < cfg.steps {
        t.train_step()?;
        if t.steps_taken % cfg.sweep.eval_every == 0 {
            last_val = t.evaluate_val()?.0;
            if window.len() == patience {
                window.pop_front();
            }
            window.push_back(last_val);
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            if window.len() == patience && mean <= target {
                return Ok(RunOutcome {
                    steps: Some(t.steps_taken),
                    final_val_loss: last_val,
                });
            }
        }
    }
    Ok(RunOutcome {
        steps: None,
        final_val_loss: last_val,
    })
}

/// One training run per grid batch size, each until the target validation
/// loss. Writes `sweep.json` and `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    if cfg.sweep.grid.is_empty() {
        return Err(Error::Config("sweep needs a nonempty `grid`".into()));
    }
    let target = cfg
        .sweep
        .target_loss
        .ok_or_else(|| Error::Config("sweep needs `target_loss`".into()))?;
    let needs_estimate = cfg.sweep.grid.contains(&GridEntry::Recommended)
        || (cfg.sweep.lr_rule == LrRule::EpsOptScaled && cfg.sweep.b_noise.is_none());
    let b_noise_hat = match cfg.sweep.b_noise {
        Some(b) => Some(b),
        None if needs_estimate => Some(estimate_mlp(cfg)?.1.b_noise_hat),
        None => None,
    };
    let recommended = match (cfg.sweep.grid.contains(&GridEntry::Recommended), b_noise_hat) {
        (true, Some(b)) => {
            let est = crate::gns::NoiseScaleEstimate {
                b_noise_hat: b,
                rho_sq: f64::NAN,
                s: f64::NAN,
                steps_used: 0,
            };
            Some(recommend_batch(&est, cfg.gns.policy, cfg.gns.hardware_cap))
        }
        _ => None,
    };
    let batches: Vec<usize> = cfg
        .sweep
        .grid
        .iter()
        .map(|e| match e {
            GridEntry::Batch(b) => *b,
            GridEntry::Recommended => recommended.expect("estimated above"),
        })
        .collect();
    let base = batches[0];
    let base_lr = cfg.optimizer.learning_rate;

    let mut warnings = Vec::new();
    let mut rows: Vec<SweepRow> = Vec::with_capacity(batches.len());
    for &batch in &batches {
        let start = Instant::now();
        let lr = match cfg.sweep.lr_rule {
            LrRule::Fixed => {
                if batch >= 8 * base {
                    warnings.push(format!(
                        "batch {batch} uses the fixed learning rate {base_lr}; larger batches need a \
                         higher starting learning rate to pay off (try lr_rule = eps_opt_scaled)"
                    ));
                }
                base_lr
            }
            LrRule::EpsOptScaled => {
                scaled_learning_rate(base_lr, base, b_noise_hat.expect("estimated above"), batch)
            }
        };
        let outcome = run_to_target(cfg, batch, lr, target)?;
        rows.push(SweepRow {
            batch,
            learning_rate: lr,
            converged: outcome.steps.is_some(),
            steps: outcome.steps,
            examples: outcome.steps.map(|s| s * batch),
            final_val_loss: outcome.final_val_loss,
            steps_vs_baseline: None,
            wall_clock: WallClock::since(start),
        });
    }
    if rows.len() > 1 {
        if let Some(base_steps) = rows[0].steps {
            for row in rows.iter_mut() {
                row.steps_vs_baseline = row.steps.map(|s| s as f64 / base_steps as f64);
            }
        }
    }

    let report = SweepReport {
        note: PROXY_NOTE,
        lr_rule: cfg.sweep.lr_rule.to_string(),
        target_loss: target,
        b_noise_hat,
        recommended_batch: recommended,
        rows,
        warnings,
    };
    cfg.ensure_out_dir()?;
    write_json(&cfg.out_path("sweep.json"), &report)?;
    let mut csv = String::from("batch,learning_rate,converged,steps,examples,final_val_loss\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.batch,
            r.learning_rate,
            r.converged,
            r.steps.map_or(String::new(), |s| s.to_string()),
            r.examples.map_or(String::new(), |s| s.to_string()),
            r.final_val_loss
        ));
    }
    std::fs::write(cfg.out_path("sweep.csv"), csv)?;
    Ok(report)
}
