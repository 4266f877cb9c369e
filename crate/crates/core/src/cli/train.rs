use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use super::config::RunConfig;
use super::output::{write_json, WallClock};
use crate::data::{make_batches, shuffle_epoch, Batch, Dataset};
use crate::error::{Error, Result};
use crate::models::{Mlp, ModelGradients};
use crate::numcore::ParameterVector;
use crate::optim::{step, OptimizerConfig, OptimizerState};
use crate::rng::{self, Rng};

/// Endless sequence of shuffled batches, one permutation per epoch.
pub struct BatchStream {
    rng: Rng,
    batch_size: usize,
    pending: std::vec::IntoIter<Batch>,
    pub epoch: usize,
}

impl BatchStream {
    pub fn new(seed: u64, batch_size: usize) -> Self {
        Self {
            rng: rng::stream(seed, 10),
            batch_size,
            pending: Vec::new().into_iter(),
            epoch: 0,
        }
    }

    /// No batches left in the current epoch.
    pub fn at_epoch_end(&self) -> bool {
        self.pending.len() == 0
    }

    /// Next batch. With `full_only`, partial remainders are skipped.
    pub fn next(&mut self, ds: &Dataset, full_only: bool) -> Result<Batch> {
        loop {
            if let Some(b) = self.pending.next() {
                if full_only && b.partial {
                    continue;
                }
                return Ok(b);
            }
            let perm = shuffle_epoch(ds.len(), &mut self.rng);
            self.pending = make_batches(ds, self.batch_size, &perm)?.into_iter();
            self.epoch += 1;
        }
    }
}

/// MLP, parameters, optimizer state, and data for one training run.
pub struct Trainer {
    pub mlp: Mlp,
    pub theta: ParameterVector,
    pub optimizer: OptimizerConfig,
    pub state: OptimizerState,
    pub train: Dataset,
    pub val: Option<Dataset>,
    pub stream: BatchStream,
    pub steps_taken: usize,
}

impl Trainer {
    pub fn new(cfg: &RunConfig, train: Dataset, val: Option<Dataset>, batch_size: usize) -> Result<Self> {
        if batch_size > train.len() {
            return Err(Error::Config(format!(
                "batch size {batch_size} exceeds the {} training examples",
                train.len()
            )));
        }
        let spec = cfg.mlp_spec(train.dim(), train.num_classes().max(2))?;
        let mlp = Mlp::new(spec);
        let theta = mlp.init();
        let state = cfg.optimizer.init_state(&theta);
        Ok(Self {
            mlp,
            theta,
            optimizer: cfg.optimizer,
            state,
            train,
            val,
            stream: BatchStream::new(cfg.seed, batch_size),
            steps_taken: 0,
        })
    }

    pub fn grads(&self, idx: &[usize]) -> Result<ModelGradients> {
        let (x, y) = self.train.gather(idx);
        self.mlp.loss_and_grads(&self.theta, &x, &y, false)
    }

    pub fn apply(&mut self, grad: &[f64]) -> Result<()> {
        let (theta, state) = step(&self.optimizer, &self.state, &self.theta, grad)?;
        if theta.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameters became non-finite at step {}; lower the learning rate",
                self.steps_taken + 1
            )));
        }
        self.theta = theta;
        self.state = state;
        self.steps_taken += 1;
        Ok(())
    }

    /// One optimizer step on the next batch. Returns the batch loss.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.stream.next(&self.train, false)?;
        let g = self.grads(&batch.indices)?;
        check_loss(g.mean_loss, self.steps_taken)?;
        self.apply(&g.batch_grad)?;
        Ok(g.mean_loss)
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<(f64, f64)> {
        let labels = ds.labels().expect("training data is labeled");
        let loss = self.mlp.loss(&self.theta, ds.features(), labels)?;
        let acc = self.mlp.accuracy(&self.theta, ds.features(), labels)?;
        Ok((loss, acc))
    }

    /// Validation metrics, falling back to the training set without a split.
    pub fn evaluate_val(&self) -> Result<(f64, f64)> {
        self.evaluate(self.val.as_ref().unwrap_or(&self.train))
    }
}

pub(crate) fn check_loss(loss: f64, step: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "loss is {loss} at step {step}; aborting (try a smaller learning rate)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub wall_clock: WallClock,
}

/// Trains to the step budget, writing `metrics.csv` (one row per epoch plus
/// the final step) and `summary.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let start = Instant::now();
    let (train, val) = cfg.load_split()?;
    let mut t = Trainer::new(cfg, train, val, cfg.batch_size)?;
    let (initial_loss, _) = t.evaluate(&t.train)?;
    check_loss(initial_loss, 0)?;

    let mut csv = String::from("epoch,step,train_loss,train_acc,val_loss,val_acc\n");
    let mut record = |t: &Trainer, epoch: usize| -> Result<()> {
        let (tl, ta) = t.evaluate(&t.train)?;
        let (vl, va) = match &t.val {
            Some(v) => {
                let (l, a) = t.evaluate(v)?;
                (l.to_string(), a.to_string())
            }
            None => (String::new(), String::new()),
        };
        writeln!(csv, "{epoch},{},{tl},{ta},{vl},{va}", t.steps_taken).unwrap();
        Ok(())
    };
    record(&t, 0)?;
    while t.steps_taken < cfg.steps {
        t.train_step()?;
        if t.stream.at_epoch_end() || t.steps_taken == cfg.steps {
            record(&t, t.stream.epoch)?;
        }
    }

    let (final_train_loss, train_acc) = t.evaluate(&t.train)?;
    check_loss(final_train_loss, t.steps_taken)?;
    let (val_loss, val_acc) = match &t.val {
        Some(v) => {
            let (l, a) = t.evaluate(v)?;
            (Some(l), Some(a))
        }
        None => (None, None),
    };
    let summary = TrainSummary {
        steps: t.steps_taken,
        epochs: t.stream.epoch,
        initial_loss,
        final_train_loss,
        train_acc,
        val_loss,
        val_acc,
        wall_clock: WallClock::since(start),
    };
    cfg.ensure_out_dir()?;
    std::fs::write(cfg.out_path("metrics.csv"), csv)?;
    write_json(&cfg.out_path("summary.json"), &summary)?;
    Ok(summary)
}
