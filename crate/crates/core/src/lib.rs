//! Core of the `servbench` inference-serving benchmark system.
//!
//! The crate is organised along the four stages of a benchmark run:
//!
//! * **Generate**: [`modelgen`] builds analytic canonical models and keeps the
//!   model repository, [`workload`] materialises arrival schedules and payloads.
//! * **Serve**: [`backend`] provides the roofline-consistent simulated device
//!   (with dynamic batching, network emulation and cold start) and an HTTP
//!   client backend for external servers.
//! * **Collect**: [`harness`] drives one job end to end, stamps every pipeline
//!   stage boundary and aggregates a [`harness::PerfRecord`].
//! * **Analyze**: [`analysis`] stores records in the file-backed PerfDB and
//!   derives rooflines, heat maps, recommendations and leaderboards.
//!
//! [`spec`] and [`catalog`] hold the declarative job spec and hardware
//! catalog shared by everything else.

pub mod analysis;
pub mod backend;
pub mod catalog;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod modelgen;
pub mod spec;
pub mod time;
pub mod workload;

pub use error::{Error, Result};

/// Version string recorded in every run's environment log.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
