//! Scenario runner for the wavekit solvers: TOML scenarios in, JSON/CSV reports out.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 non-convergence,
//! 4 singular or non-hyperbolic diagnostic.

pub mod compare;
pub mod config;
pub mod output;
pub mod report;
pub mod run;
pub mod sweep;
