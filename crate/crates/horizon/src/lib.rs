//! File formats, reports and the command-line front end for `horizon-core`.
//!
//! System definitions are JSON ([`sysfile`]); the four example systems ship
//! with the crate. [`run::Pipeline`] strings the core stages together,
//! [`report`] turns the results into serializable records and [`export`]
//! writes trajectories and sweeps as CSV. [`golden`] holds the reference
//! values the test suite checks against.

pub mod cli;
pub mod error;
pub mod export;
pub mod golden;
pub mod report;
pub mod run;
pub mod sysfile;

pub use error::{Error, Result};
pub use horizon_core as core;
