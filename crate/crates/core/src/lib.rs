//! Sequential energy optimization for a connected hybrid electric vehicle.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ac_mpc;
pub mod error;
pub mod pipeline;
pub mod power_split;
pub mod report;
pub mod sim;
pub mod speed_planner;
pub mod thermal;
pub mod traffic;
pub mod vehicle;

pub use error::{Error, Result};
