//! Deterministic simulator for federated optimization: local-update methods
//! chained into global-update methods, their baselines, heterogeneity-controlled
//! problem families, and a communication lower-bound instance.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaining;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod objectives;
pub mod optimizers;
pub mod rng;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use vector::Vector;
