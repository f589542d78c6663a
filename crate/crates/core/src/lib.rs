//! Federated learning simulator for imbalance-aware training.
//!
//! The server infers the class composition of each aggregation round from
//! last-layer weight deltas and per-class probe gradients on auxiliary data,
//! tracks the global class ratio with an autoregressive observer, and
//! re-weights the clients' loss with effective-number class weights.

// `!(x >= 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod exp;
pub mod nn;
pub mod observer;
pub mod parallel;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
