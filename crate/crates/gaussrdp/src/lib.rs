//! File formats, grid sweeps and verification around `gaussrdp-core`.

pub mod cli;
pub mod covfile;
pub mod error;
pub mod format;
pub mod grid;
pub mod sweep;
pub mod verify;
