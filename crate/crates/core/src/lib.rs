//! Calibration of linearized computer models against experimental data, with the model error
//! treated as a Gaussian process.
//!
//! The observations are modeled as `y_obs = H beta + z + eps`, where `H` holds the derivatives
//! of the computer model with respect to its parameters, `z` is a centered Gaussian process
//! (the model error) and `eps` the measurement error. From that model the crate provides
//!
//! * the four stationary correlation families and covariance assembly ([`kernels`]),
//! * model assembly and finite-difference linearization ([`gpmodel`]),
//! * restricted-maximum-likelihood estimation of the model-error hyper-parameters ([`reml`]),
//! * closed-form calibration and prediction, with and without a Gaussian prior ([`infer`]),
//! * K-fold cross validation of the whole pipeline ([`crossval`]),
//! * a synthetic single-phase friction model used by the demo ([`friction`]),
//! * dataset and configuration I/O and the command-line front end ([`dataset`], [`config`],
//!   [`cli`]).
//!
//! See the `examples/` directory of the crate for one runnable program per capability.

pub mod cli;
pub mod config;
pub mod crossval;
pub mod dataset;
pub mod error;
pub mod friction;
pub mod gpmodel;
pub mod infer;
pub mod kernels;
pub mod linalg;
pub mod reml;

pub use error::{Error, ErrorKind, Result};
pub use gpmodel::{Design, GpModel, LinearModel, Observations, Prior};
pub use infer::{CalibrationResult, Level, Prediction, Regime};
pub use kernels::{CovarianceSpec, KernelFamily, NoiseSpec};
pub use reml::{OptimizerConfig, RemlEstimate};
