//! Personalized federated learning simulator built around a pull/push
//! model-distance loss.
//!
//! Each client trains a personalized model. Every round the server takes
//! one gradient step on a softmax-of-distances loss over the uploaded
//! models, producing a per-client anchor that is provably a linear
//! combination of the round's models: similar models attract each other,
//! dissimilar ones repel. Clients then minimize their empirical loss plus a
//! proximal pull toward their anchor. FedAvg and no-collaboration baselines,
//! non-IID partitioners, a from-scratch MLP/Adam training core, and a CLI
//! round out the simulator.
//!
//! Entry points:
//! - [`orchestrator::run`] executes a [`orchestrator::RunConfig`];
//! - [`cli::cli_main`] is the command-line surface;
//! - [`check`] holds the numerical self-check suites.

pub mod check;
pub mod cli;
pub mod client;
pub mod config;
pub mod data;
pub mod distance;
pub mod error;
pub mod neural;
pub mod orchestrator;
pub mod param;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
