//! Library surface of the benchmark runner, used by the `tabfed` binary
//! and by the acceptance suite.

pub mod config;
pub mod report;
pub mod suite;
