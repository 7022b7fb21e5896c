//! File formats, benchmark harness and command-line front end for adaptive
//! L# learning. The algorithms themselves live in `alsharp-core`.

pub mod cli;
pub mod config;
pub mod dot;
pub mod harness;

pub use config::{OracleKind, RunConfig, Seeds};
pub use dot::{parse_dot, tree_to_dot, write_dot, DotError};
