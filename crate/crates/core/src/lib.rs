//! RSSI channel estimation with small dense networks.
//!
//! The crate covers the full experiment pipeline for one-step RSSI
//! forecasting on indoor traces:
//!
//! - [`linalg`]: dense f64 matrix/vector primitives
//! - [`nn`]: feedforward networks with Leaky ReLU, MSE loss, analytic backprop
//! - [`optim`]: the NAdam optimizer, SGD, and a finite-difference gradient oracle
//! - [`data`]: CSV ingestion, reading/location averaging, sliding windows,
//!   temporal splits, z-score normalization
//! - [`chansim`]: synthetic log-distance/AR(1)-shadowing RSSI generator
//! - [`models`]: the two estimator variants and their training loops
//! - [`eval`]: metrics, classical baselines, comparison reports
//!
//! Everything is seeded and deterministic: the same configuration always
//! produces bitwise-identical traces, weights, and metrics.

pub mod chansim;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod nn;
pub mod optim;

pub use error::{Error, Result};
