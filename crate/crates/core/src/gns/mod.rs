//! Gradient noise scale estimation and batch-size advice.
//!
//! Two gradient norms measured at batch sizes `B_small < B_big` give unbiased
//! estimates of `|G|²` and `tr(Σ)`. Both are smoothed with an exponential
//! moving average, and their ratio estimates the simple noise scale
//! `tr(Σ)/|G|²`, the batch size past which larger batches stop paying off.

mod advisor;
mod estimator;
mod report;

pub use advisor::{eps_opt, recommend_batch, tradeoff_curve, BatchPolicy, TradeoffCurve, TradeoffPoint};
pub use estimator::{
    exact_simple_noise, paired_batch_stats, GnsAccumulator, GnsEstimator, NoiseScaleEstimate,
    PairedBatchConfig, PairedStats, DEFAULT_ALPHA, DEFAULT_WARMUP,
};
pub use report::{tradeoff_csv, GnsReport};
