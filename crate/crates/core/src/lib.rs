//! Gradient noise scale estimation and training-efficiency advising.
//!
//! The crate is organised bottom-up:
//!
//! - [`numcore`]: dense row-major matrices, segmented parameter vectors, and a
//!   central-difference gradient oracle.
//! - [`models`]: a small MLP classifier with hand-written backprop and an
//!   analytic noisy quadratic whose gradient, Hessian and per-example gradient
//!   covariance are known exactly.
//! - [`optim`]: gradient descent, SGD, momentum, Adam and LAMB-style updates,
//!   plus decoupled weight decay as a separate step.
//! - [`gns`]: the paired-batch noise scale estimator, EMA smoothing, the
//!   optimal step size model, and batch size recommendations.
//! - [`augsearch`]: augmentation transforms, a seeded random embedder, the
//!   Fréchet distance between Gaussians, and distance-band grouping.
//! - [`data`]: dataset IO, synthetic blobs, Fisher-Yates shuffling, batching.
//! - [`cli`]: run configuration and the subcommands behind the `batchscale`
//!   binary.
//!
//! All arithmetic is `f64`. Every random draw comes from an explicitly seeded
//! [`rng::Rng`] (ChaCha8), so runs are reproducible bit for bit.

pub mod augsearch;
pub mod cli;
pub mod data;
pub mod error;
pub mod gns;
pub mod kvfile;
pub mod models;
pub mod numcore;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
