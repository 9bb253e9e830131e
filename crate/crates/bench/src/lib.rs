//! Benchmark harness for data-driven co-design of distributed controllers and
//! dynamic event-triggering schemes: configuration, the `etcd` commands, and
//! their CSV and manifest outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::Bench;
pub use config::{BenchmarkConfig, Variant};
pub use error::BenchError;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
