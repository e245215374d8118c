//! Command-line front end: scenario files, run output, self-checks and
//! parameter sweeps.

pub mod config;
pub mod output;
pub mod sweep;
pub mod verify;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// verification failure or an I/O problem while writing results
    pub const FAILURE: u8 = 1;
    /// bad configuration or usage
    pub const CONFIG: u8 = 2;
    /// the simulation aborted; partial results were written
    pub const FAULT: u8 = 3;
}
