//! File formats, precompute and sweep drivers, and the command-line front
//! end for [`eoam_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod pipeline;
pub mod sweep;
pub mod tables;
pub mod validate;

pub use error::{AppError, AppResult};

/// Process exit codes.
pub mod exit {
    use eoam_core::scenario::Outcome;

    pub const OK: i32 = 0;
    pub const YELLOW: i32 = 10;
    pub const ORANGE: i32 = 20;
    pub const RED: i32 = 30;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;

    pub fn for_outcome(o: Outcome) -> i32 {
        match o {
            Outcome::Green => OK,
            Outcome::Yellow => YELLOW,
            Outcome::Orange => ORANGE,
            Outcome::Red => RED,
        }
    }
}
