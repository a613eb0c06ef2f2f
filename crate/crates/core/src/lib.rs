//! Joint task offloading, uplink bandwidth allocation and computation
//! placement for collaborative multi-UAV edge computing networks.

pub mod baselines;
pub mod channel;
pub mod cost;
pub mod cra;
pub mod error;
pub mod harness;
pub mod orchestrator;
pub mod scenario;
pub mod uad;
pub mod units;
pub mod utod;

pub use error::{Error, Result};
