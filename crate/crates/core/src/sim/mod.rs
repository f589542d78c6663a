//! Federated round engine.

mod aggregate;
mod client;
mod config;
mod round;

pub use aggregate::{aggregate, sample_weights};
pub use client::{local_update, select_clients, ClientUpdate};
pub use config::{Algorithm, BaselineLoss, FlConfig, Strategy};
pub use round::{summarize, Experiment, RoundRecord, Summary};
