//! Robust clustered federated learning at desk scale: per-task sparse Huber
//! regression by iterative hard thresholding, with a central server that
//! adaptively clusters tasks and shares information within each group.
//!
//! The crate is organized around the simulation pipeline:
//!
//! - [`huber`] — Huber loss, per-task empirical objective and gradient
//! - [`projection`] — hard thresholding and group-aggregated thresholding
//! - [`local_iht`] — independent per-task sparse fits (projected gradient)
//! - [`central`] — the server-side clustering/fusion solver and k-means
//! - [`federated`] — round-based orchestration over an explicit message
//!   boundary, plus the pooled and squared-loss baseline variants
//! - [`simgen`] — synthetic scenario generation and CSV ingestion
//! - [`metrics`] — MSE, support errors, Rand index
//! - [`tuning`] — step-size and model selection over hyperparameter grids

pub mod central;
pub mod error;
pub mod federated;
pub mod huber;
pub mod local_iht;
pub mod metrics;
pub mod projection;
pub mod simgen;
pub mod tuning;

pub use error::{Error, Result};
