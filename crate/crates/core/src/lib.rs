//! Simulation of bosonic two-mode state transfer: truncated Fock spaces,
//! control schedules, unitary and Lindblad propagation, and error analysis.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod protocols;
pub mod quad;
pub mod scenario;
pub mod sparse;

pub use error::{Error, Result};

/// Fixed 12-significant-digit scientific formatting used in all CSV output.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}
