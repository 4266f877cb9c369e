//! Parameter update rules.
//!
//! Optimizer state lives outside the parameters and is threaded through
//! [`step`] by the training loop. Decoupled weight decay is never folded into
//! the gradient: it is a separate multiplicative shrink applied after the
//! optimizer update.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numcore::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Full-batch gradient descent. Same rule as SGD; the caller supplies the
    /// gradient over the whole dataset.
    Gd,
    Sgd,
    Momentum,
    Adam,
    /// Adam-style moments with a per-segment trust ratio.
    Lamb,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gd" => Self::Gd,
            "sgd" => Self::Sgd,
            "momentum" => Self::Momentum,
            "adam" => Self::Adam,
            "lamb" => Self::Lamb,
            other => {
                return Err(Error::Config(format!(
                    "unknown optimizer `{other}` (expected gd, sgd, momentum, adam or lamb)"
                )))
            }
        })
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gd => "gd",
            Self::Sgd => "sgd",
            Self::Momentum => "momentum",
            Self::Adam => "adam",
            Self::Lamb => "lamb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Momentum coefficient, or β₁ for adam/lamb.
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.learning_rate * self.weight_decay >= 1.0 {
            return Err(Error::Config(format!(
                "learning_rate * weight_decay = {} would flip parameter signs",
                self.learning_rate * self.weight_decay
            )));
        }
        Ok(())
    }

    /// Fresh state for `theta`.
    pub fn init_state(&self, theta: &ParameterVector) -> OptimizerState {
        let n = theta.total_len();
        match self.kind {
            OptimizerKind::Gd | OptimizerKind::Sgd => OptimizerState::Stateless,
            OptimizerKind::Momentum => OptimizerState::Momentum {
                velocity: vec![0.0; n],
            },
            OptimizerKind::Adam | OptimizerKind::Lamb => OptimizerState::Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Stateless,
    Momentum { velocity: Vec<f64> },
    Moments { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

/// One optimizer update followed by decoupled weight decay.
pub fn step(
    config: &OptimizerConfig,
    state: &OptimizerState,
    theta: &ParameterVector,
    grad: &[f64],
) -> Result<(ParameterVector, OptimizerState)> {
    config.validate()?;
    let n = theta.total_len();
    if grad.len() != n {
        return Err(Error::Shape(format!(
            "gradient has {} entries, parameters have {n}",
            grad.len()
        )));
    }
    let lr = config.learning_rate;
    let mut next = theta.clone();
    let new_state = match (config.kind, state) {
        (OptimizerKind::Gd | OptimizerKind::Sgd, OptimizerState::Stateless) => {
            for (p, g) in next.values_mut().iter_mut().zip(grad) {
                *p -= lr * g;
            }
            OptimizerState::Stateless
        }
        (OptimizerKind::Momentum, OptimizerState::Momentum { velocity }) => {
            check_len(velocity.len(), n)?;
            let velocity: Vec<f64> = velocity
                .iter()
                .zip(grad)
                .map(|(v, g)| config.beta1 * v + g)
                .collect();
            for (p, v) in next.values_mut().iter_mut().zip(&velocity) {
                *p -= lr * v;
            }
            OptimizerState::Momentum { velocity }
        }
        (OptimizerKind::Adam | OptimizerKind::Lamb, OptimizerState::Moments { m, v, t }) => {
            check_len(m.len(), n)?;
            check_len(v.len(), n)?;
            let (b1, b2) = (config.beta1, config.beta2);
            let t = t + 1;
            let m: Vec<f64> = m.iter().zip(grad).map(|(m, g)| b1 * m + (1.0 - b1) * g).collect();
            let v: Vec<f64> = v
                .iter()
                .zip(grad)
                .map(|(v, g)| b2 * v + (1.0 - b2) * g * g)
                .collect();
            let c1 = 1.0 - b1.powf(t as f64);
            let c2 = 1.0 - b2.powf(t as f64);
            let update: Vec<f64> = m
                .iter()
                .zip(&v)
                .map(|(m, v)| (m / c1) / ((v / c2).sqrt() + config.epsilon))
                .collect();
            if config.kind == OptimizerKind::Adam {
                for (p, u) in next.values_mut().iter_mut().zip(&update) {
                    *p -= lr * u;
                }
            } else {
                for seg in theta.segments() {
                    let r = seg.range.clone();
                    let ratio = trust_ratio(&theta.values()[r.clone()], &update[r.clone()]);
                    for i in r {
                        next.values_mut()[i] -= lr * ratio * update[i];
                    }
                }
            }
            OptimizerState::Moments { m, v, t }
        }
        (kind, _) => {
            return Err(Error::Usage(format!(
                "optimizer state does not belong to a `{kind}` optimizer"
            )))
        }
    };
    let next = apply_decoupled_weight_decay(&next, config.weight_decay, lr)?;
    Ok((next, new_state))
}

/// `‖θ‖ / ‖update‖`, or 1 when either norm is zero.
fn trust_ratio(params: &[f64], update: &[f64]) -> f64 {
    let pn = crate::numcore::norm(params);
    let un = crate::numcore::norm(update);
    if pn > 0.0 && un > 0.0 {
        pn / un
    } else {
        1.0
    }
}

fn check_len(state: usize, n: usize) -> Result<()> {
    if state != n {
        return Err(Error::Shape(format!(
            "optimizer state has {state} entries, parameters have {n}"
        )));
    }
    Ok(())
}

/// `θ' = (1 − η·λ)·θ`.
pub fn apply_decoupled_weight_decay(
    theta: &ParameterVector,
    lambda: f64,
    eta: f64,
) -> Result<ParameterVector> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("weight decay must be >= 0, got {lambda}")));
    }
    if eta * lambda >= 1.0 {
        return Err(Error::Config(format!(
            "eta * lambda = {} would flip parameter signs",
            eta * lambda
        )));
    }
    if lambda == 0.0 {
        return Ok(theta.clone());
    }
    let keep = 1.0 - eta * lambda;
    let mut out = theta.clone();
    out.values_mut().iter_mut().for_each(|p| *p *= keep);
    Ok(out)
}
