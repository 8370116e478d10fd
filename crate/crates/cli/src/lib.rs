//! Command-line pipeline over the `bubbletrack` library: tracking, feature
//! tables, interface-velocity spectrograms and AP evaluation, written as
//! deterministic CSV/JSON with a run manifest.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::{Overrides, RunConfig, Settings};
pub use error::{CliError, ErrorKind};
pub use pipeline::{execute, Command, Manifest};
