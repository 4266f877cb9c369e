//! Subcommands behind the `batchscale` binary.
//!
//! Each command takes a validated [`RunConfig`], writes its reports into the
//! configured output directory, and returns the report for printing.

pub mod config;
mod estimate;
mod group;
mod output;
mod sweep;
mod train;
mod verify;

pub use config::{GridEntry, LrRule, RunConfig, KEYS, OUT_DIR_ENV};
pub use estimate::{cmd_estimate_gns, estimate_mlp, estimate_quadratic, GnsRunReport, QuadraticOracle};
pub use group::{cmd_group_transforms, format_groups};
pub use output::{strip_wall_clock, WallClock};
pub use sweep::{cmd_sweep, scaled_learning_rate, SweepReport, SweepRow, PROXY_NOTE};
pub use train::{cmd_train, BatchStream, TrainSummary, Trainer};
pub use verify::{cmd_verify_quadratic, format_table, step_gain_curve, Check, VerifyReport};
