//! Driver for the `crackfield` solver: run configuration, benchmark
//! studies, reports and file output. The numerics live in
//! [`crackfield_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod report;
pub mod study;

pub use config::{dump_config, parse_config, parse_config_over, ConfigError, RunConfig};
pub use study::{StudyError, StudyKind};
