//! Offline planning and online execution of emergency obstacle avoidance
//! maneuvers for a road vehicle at highway speed.
//!
//! The crate is `no_std` with `alloc`. Everything that touches files, the
//! command line or threads lives in the companion `eoam` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dmm;
pub mod error;
pub mod inverse;
pub mod math;
pub mod optimizer;
pub mod path;
pub mod runtime;
pub mod scenario;
pub mod vehicle;

pub use error::{Error, Result};
