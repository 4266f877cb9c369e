//! Run configuration.
//!
//! A run is described by a flat `key = value` file (see [`KEYS`]); command-line
//! flags override individual keys. The output directory can also be overridden
//! with the `BATCHSCALE_OUT_DIR` environment variable.

use std::path::{Path, PathBuf};

use crate::augsearch::Transform;
use crate::data::{make_blobs, BlobSpec, DataFormat, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::gns::{BatchPolicy, PairedBatchConfig, DEFAULT_ALPHA, DEFAULT_WARMUP};
use crate::kvfile::KvFile;
use crate::models::{Activation, MlpSpec};
use crate::optim::{OptimizerConfig, OptimizerKind};

pub const OUT_DIR_ENV: &str = "BATCHSCALE_OUT_DIR";

/// Every recognised key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "required; seeds every random stream"),
    ("out_dir", "report directory (default `out`)"),
    ("dataset", "path to a dataset file; synthetic blobs when absent"),
    ("format", "csv | raw_f64 (default csv)"),
    ("labeled", "last CSV column is a label (default true)"),
    ("normalize", "min-max scale features to [0,1] (default false)"),
    ("num_classes", "class count (default: largest label + 1)"),
    ("blobs_n", "synthetic examples (default 2000)"),
    ("blobs_dim", "synthetic feature dimension (default 2)"),
    ("blobs_classes", "synthetic classes (default 2)"),
    ("blobs_separation", "std of class centers (default 3)"),
    ("blobs_spread", "within-class std (default 1)"),
    ("blobs_imbalance", "largest/smallest class ratio (default 1)"),
    ("blobs_seed", "seed for the synthetic data (default: seed)"),
    ("val_fraction", "held-out fraction (default 0.2)"),
    ("hidden", "hidden layer widths, e.g. `32 32` (default 32)"),
    ("activation", "relu | tanh (default relu)"),
    ("optimizer", "gd | sgd | momentum | adam | lamb (default sgd)"),
    ("learning_rate", "step size (default 0.05)"),
    ("beta1", "momentum / first-moment coefficient (default 0.9)"),
    ("beta2", "second-moment coefficient (default 0.999)"),
    ("epsilon", "adam/lamb denominator offset (default 1e-8)"),
    ("weight_decay", "decoupled weight decay (default 0)"),
    ("batch_size", "training batch size (default 32)"),
    ("steps", "optimizer step budget (default 1000)"),
    ("eval_every", "steps between validation checks in sweeps (default 10)"),
    ("b_small", "small batch of the paired estimator (default 8)"),
    ("b_big", "big batch of the paired estimator (default 64)"),
    ("alpha", "EMA coefficient (default 0.01)"),
    ("warmup", "iterations before the noise scale is reported (default 50)"),
    ("policy", "balanced | min_time | min_compute (default balanced)"),
    ("hardware_cap", "largest batch the hardware allows (default 1024)"),
    ("eps_max", "infinite-batch step size for the tradeoff curve"),
    ("b_noise", "known noise scale; skips estimation in sweeps"),
    ("quadratic", "noisy-quadratic spec file"),
    ("grid", "sweep batch sizes; `rec` means the recommended batch"),
    ("lr_rule", "fixed | eps_opt_scaled (default fixed)"),
    ("target_loss", "validation loss a sweep run must reach"),
    ("patience", "validation checks in the convergence moving mean (default 5)"),
    ("image_height", "image height for grouping (default: square images)"),
    ("transforms", "transform catalog subset (default: all six)"),
    ("magnitudes", "magnitude grid in [0,1] (default 0 0.25 0.5 0.75 1)"),
    ("num_groups", "number of distance bands (default 5)"),
    ("embed_dim", "embedding dimension (default 8)"),
    ("embed_hidden", "embedder hidden width (default 64)"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrRule {
    Fixed,
    EpsOptScaled,
}

impl std::str::FromStr for LrRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "eps_opt_scaled" => Ok(Self::EpsOptScaled),
            other => Err(Error::Config(format!(
                "unknown lr_rule `{other}` (expected fixed or eps_opt_scaled)"
            ))),
        }
    }
}

impl std::fmt::Display for LrRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::EpsOptScaled => "eps_opt_scaled",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File {
        path: PathBuf,
        format: DataFormat,
        options: LoadOptions,
    },
    Blobs(BlobSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridEntry {
    Batch(usize),
    Recommended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnsOptions {
    pub pair: PairedBatchConfig,
    pub alpha: f64,
    pub warmup: usize,
    pub policy: BatchPolicy,
    pub hardware_cap: usize,
    pub eps_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub grid: Vec<GridEntry>,
    pub lr_rule: LrRule,
    pub target_loss: Option<f64>,
    pub patience: usize,
    pub eval_every: usize,
    pub b_noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupOptions {
    pub image_height: Option<usize>,
    pub transforms: Vec<Transform>,
    pub magnitudes: Vec<f64>,
    pub num_groups: usize,
    pub embed_dim: usize,
    pub embed_hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataSource,
    pub val_fraction: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub steps: usize,
    pub gns: GnsOptions,
    pub quadratic: Option<PathBuf>,
    pub sweep: SweepOptions,
    pub group: GroupOptions,
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf> {
    if !path.exists() {
        return Err(Error::Config(format!("{what} `{}` does not exist", path.display())));
    }
    Ok(path)
}

impl RunConfig {
    /// Builds a config from `kv`; the environment override for the output
    /// directory is applied by the caller via [`RunConfig::with_env`].
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        if let Some(unknown) = kv.keys().find(|k| !KEYS.iter().any(|(name, _)| name == k)) {
            return Err(Error::Config(format!("unknown config key `{unknown}`")));
        }
        let seed: u64 = kv.get("seed")?.ok_or_else(|| {
            Error::Config("`seed` is required; runs are never seeded from the clock".into())
        })?;

        let data = match kv.raw("dataset") {
            Some(p) => DataSource::File {
                path: existing(PathBuf::from(p), "dataset")?,
                format: kv.get("format")?.unwrap_or(DataFormat::Csv),
                options: LoadOptions {
                    labeled: kv.get("labeled")?.unwrap_or(true),
                    normalize: kv.get("normalize")?.unwrap_or(false),
                    num_classes: kv.get("num_classes")?,
                },
            },
            None => DataSource::Blobs(BlobSpec {
                n: kv.get("blobs_n")?.unwrap_or(2000),
                dim: kv.get("blobs_dim")?.unwrap_or(2),
                classes: kv.get("blobs_classes")?.unwrap_or(2),
                separation: kv.get("blobs_separation")?.unwrap_or(3.0),
                spread: kv.get("blobs_spread")?.unwrap_or(1.0),
                imbalance: kv.get("blobs_imbalance")?.unwrap_or(1.0),
                seed: kv.get("blobs_seed")?.unwrap_or(seed),
            }),
        };
        let val_fraction: f64 = kv.get("val_fraction")?.unwrap_or(0.2);
        if !(0.0..1.0).contains(&val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction must be in [0, 1), got {val_fraction}"
            )));
        }

        let mut optimizer = OptimizerConfig::new(
            kv.get::<OptimizerKind>("optimizer")?.unwrap_or(OptimizerKind::Sgd),
            kv.get("learning_rate")?.unwrap_or(0.05),
        );
        if let Some(b) = kv.get("beta1")? {
            optimizer.beta1 = b;
        }
        if let Some(b) = kv.get("beta2")? {
            optimizer.beta2 = b;
        }
        if let Some(e) = kv.get("epsilon")? {
            optimizer.epsilon = e;
        }
        optimizer.weight_decay = kv.get("weight_decay")?.unwrap_or(0.0);
        optimizer.validate()?;

        let batch_size: usize = kv.get("batch_size")?.unwrap_or(32);
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }

        let gns = GnsOptions {
            pair: PairedBatchConfig::new(
                kv.get("b_small")?.unwrap_or(8),
                kv.get("b_big")?.unwrap_or(64),
            )?,
            alpha: kv.get("alpha")?.unwrap_or(DEFAULT_ALPHA),
            warmup: kv.get("warmup")?.unwrap_or(DEFAULT_WARMUP),
            policy: kv.get("policy")?.unwrap_or(BatchPolicy::Balanced),
            hardware_cap: kv.get("hardware_cap")?.unwrap_or(1024),
            eps_max: kv.get("eps_max")?,
        };
        if gns.hardware_cap == 0 {
            return Err(Error::Config("hardware_cap must be at least 1".into()));
        }
        if let Some(e) = gns.eps_max {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("eps_max must be > 0, got {e}")));
            }
        }

        let grid = match kv.get_list::<String>("grid")? {
            None => Vec::new(),
            Some(items) => items
                .iter()
                .map(|t| match t.as_str() {
                    "rec" => Ok(GridEntry::Recommended),
                    n => n
                        .parse::<usize>()
                        .ok()
                        .filter(|&b| b > 0)
                        .map(GridEntry::Batch)
                        .ok_or_else(|| Error::Config(format!("bad grid entry `{n}`"))),
                })
                .collect::<Result<_>>()?,
        };
        let sweep = SweepOptions {
            grid,
            lr_rule: kv.get("lr_rule")?.unwrap_or(LrRule::Fixed),
            target_loss: kv.get("target_loss")?,
            patience: kv.get("patience")?.unwrap_or(5).max(1),
            eval_every: kv.get("eval_every")?.unwrap_or(10).max(1),
            b_noise: kv.get("b_noise")?,
        };

        let transforms = match kv.get_list::<String>("transforms")? {
            None => Transform::CATALOG.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<Vec<Transform>>>()?,
        };
        let group = GroupOptions {
            image_height: kv.get("image_height")?,
            transforms,
            magnitudes: kv
                .get_list("magnitudes")?
                .unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75, 1.0]),
            num_groups: kv.get("num_groups")?.unwrap_or(5),
            embed_dim: kv.get("embed_dim")?.unwrap_or(8),
            embed_hidden: kv.get("embed_hidden")?.unwrap_or(64),
        };
        if let Some(m) = group.magnitudes.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Config(format!("magnitude {m} outside [0, 1]")));
        }

        Ok(Self {
            seed,
            out_dir: kv.raw("out_dir").map_or_else(|| PathBuf::from("out"), PathBuf::from),
            data,
            val_fraction,
            hidden: kv.get_list("hidden")?.unwrap_or_else(|| vec![32]),
            activation: kv.get("activation")?.unwrap_or(Activation::Relu),
            optimizer,
            batch_size,
            steps: kv.get("steps")?.unwrap_or(1000),
            gns,
            quadratic: kv
                .raw("quadratic")
                .map(|p| existing(PathBuf::from(p), "quadratic spec"))
                .transpose()?,
            sweep,
            group,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvFile::parse(text)?)
    }

    /// Applies the `BATCHSCALE_OUT_DIR` override, if set.
    pub fn with_env(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            self.out_dir = PathBuf::from(dir);
        }
        self
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::File {
                path,
                format,
                options,
            } => crate::data::load_dataset(path, *format, *options),
            DataSource::Blobs(spec) => make_blobs(spec),
        }
    }

    /// Training and validation parts of the configured dataset.
    pub fn load_split(&self) -> Result<(Dataset, Option<Dataset>)> {
        let ds = self.load_dataset()?;
        if ds.labels().is_none() {
            return Err(Error::Data("training needs a labeled dataset".into()));
        }
        let n_val = (ds.len() as f64 * self.val_fraction).round() as usize;
        if n_val == 0 {
            return Ok((ds, None));
        }
        let (train, val) = ds.split_at(ds.len() - n_val)?;
        Ok((train, Some(val)))
    }

    pub fn mlp_spec(&self, input_dim: usize, classes: usize) -> Result<MlpSpec> {
        let mut widths = vec![input_dim];
        widths.extend(&self.hidden);
        widths.push(classes);
        MlpSpec::new(widths, self.activation, self.seed)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn ensure_out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(&self.out_dir)
    }
}
