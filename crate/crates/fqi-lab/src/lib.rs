//! IO and orchestration companion to `fqi-core`: experiment configuration,
//! seeded commands, CSV artifacts, and reproducibility manifests.
//!
//! The split is strict — `fqi-core` computes, this crate reads configs,
//! spreads independent work units over a thread pool, and writes files.
//! Every run folder gets a `manifest.json` recording the inputs (config
//! text, seed, code version, PRNG algorithm) and a SHA-256 hash per output
//! file, so reruns can be checked for bit-identical artifacts.

use std::fmt;

pub mod commands;
pub mod config;
pub mod runio;

/// Failure carrying the process exit category: configuration problems map
/// to exit code 2, anything that goes wrong while running (numerics, IO,
/// missing inputs) to exit code 3.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Run(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "config error: {msg}"),
            Failure::Run(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<fqi_core::Error> for Failure {
    fn from(e: fqi_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("io error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Failure>;
