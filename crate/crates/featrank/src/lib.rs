//! Feature ranking for feedforward classifiers.
//!
//! Three ranking methods over the input features of a trained MLP:
//!
//! - **SWPA** — a multiplicative drop-in layer in front of the network whose
//!   weights are magnitude-pruned over several training rounds; surviving
//!   weights rank the features.
//! - **SBS** — the absolute mean input gradient of each instance's true-class
//!   probability.
//! - **PFI** — the mean accuracy drop when a feature column is randomly
//!   permuted, as a model-agnostic baseline.
//!
//! Rankings are validated by remove-and-retrain: slice the top and bottom
//! fractions of the ranking, retrain fresh reduced networks on each subset,
//! and compare test accuracies. The [`harness`] module orchestrates that
//! protocol and emits deterministic JSON/Markdown reports.

pub mod data;
pub mod dropin;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod selectors;

pub use error::{Error, Result};
pub use linalg::Dense2D;
