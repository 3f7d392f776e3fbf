//! Subframe-level simulator for C-V2X mode 4 sidelink communication with
//! sensing-based semi-persistent scheduling.
//!
//! The crate models the resource pool, the WINNER+ B1 channel, a threshold
//! PHY with interference summation, the per-UE SPS state machine, static and
//! Manhattan-grid mobility, and PRR/PIR metrics. [`engine::run`] wires them
//! into one deterministic run and [`sweep`] runs grids of them in parallel.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod mobility;
pub mod phy;
pub mod pool;
pub mod sps;
pub mod sweep;

pub use config::{load_config, ConfigFile};
pub use engine::{run, ScenarioKind, SimConfig, SimResult};
pub use error::{Error, Result};
