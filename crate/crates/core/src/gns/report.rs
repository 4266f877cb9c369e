use serde::Serialize;

use super::{BatchPolicy, GnsAccumulator, NoiseScaleEstimate, TradeoffPoint};

/// JSON document describing one noise-scale estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnsReport {
    pub b_noise_hat: f64,
    pub rho_sq_ema: f64,
    pub s_ema: f64,
    pub alpha: f64,
    pub steps_used: usize,
    pub recommendation: usize,
    pub policy: BatchPolicy,
    pub tradeoff_curve: Vec<TradeoffPoint>,
}

impl GnsReport {
    pub fn new(
        acc: &GnsAccumulator,
        estimate: &NoiseScaleEstimate,
        policy: BatchPolicy,
        recommendation: usize,
        tradeoff_curve: Vec<TradeoffPoint>,
    ) -> Self {
        Self {
            b_noise_hat: estimate.b_noise_hat,
            rho_sq_ema: acc.rho_sq_ema(),
            s_ema: acc.s_ema(),
            alpha: acc.alpha(),
            steps_used: estimate.steps_used,
            recommendation,
            policy,
            tradeoff_curve,
        }
    }
}

/// `batch,eps_opt,relative_steps,relative_examples` with a header row.
pub fn tradeoff_csv(points: &[TradeoffPoint]) -> String {
    let mut out = String::from("batch,eps_opt,relative_steps,relative_examples\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.batch, p.eps_opt, p.relative_steps, p.relative_examples
        ));
    }
    out
}
