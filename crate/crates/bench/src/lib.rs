//! Benchmark cases, convergence studies and report writers for `stiga`.

pub mod cases;
pub mod config;
pub mod convergence;
pub mod output;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] stiga::Error),
    #[error("slab {slab} failed: {source}")]
    Slab {
        slab: usize,
        #[source]
        source: stiga::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed solution file: {0}")]
    Format(String),
}
