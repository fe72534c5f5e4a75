//! Experiment orchestration on top of the `combdsp` library: scenario
//! configuration files, a parallel per-channel pipeline runner, CSV
//! persistence, summary reports, and SVG plots.

pub mod config;
pub mod csvio;
pub mod plots;
pub mod report;
pub mod runner;
pub mod scenarios;

/// Application-level failure, split by who has to act on it.
#[derive(Debug)]
pub enum AppError {
    /// Bad configuration or usage; maps to exit code 1.
    Config(String),
    /// A processing stage failed at runtime; maps to exit code 2.
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(msg) => write!(f, "configuration error: {msg}"),
            AppError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 1,
            AppError::Runtime(_) => 2,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
