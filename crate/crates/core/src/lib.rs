//! Dynamics at infinity for nonautonomous, asymptotically quasi-homogeneous
//! ODE systems.
//!
//! The pipeline: a [`system::SystemDef`] is compactified by the
//! quasi-parabolic embedding ([`embedding`]), desingularized into a vector
//! field that is smooth up to the horizon ([`desing`]), and its horizon
//! equilibria are paired with roots of the balance law ([`balance`]). The
//! eigenstructure correspondence between the two sides and the blow-up
//! existence criterion live in [`correspondence`]; [`flow`] integrates the
//! desingularized field and recovers blow-up times and rates.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod balance;
pub mod correspondence;
pub mod desing;
pub mod embedding;
pub mod error;
pub mod expr;
pub mod flow;
pub mod linalg;
pub mod system;

pub use error::{Error, Result};
pub use nalgebra;
