//! File formats, experiment configuration, parallel execution and the grid
//! runner around [`peerfed_core`].

pub mod config;
pub mod csv_load;
pub mod datasets;
mod error;
pub mod grid;
pub mod parallel;
pub mod summary;
pub mod table;

pub use config::{parse_config, validate_config, ExperimentConfig, SplitSpec};
pub use error::{Error, Result};
pub use grid::{run_cell, run_grid, summarize_dir, GridOptions, GridReport};
pub use parallel::Parallel;
pub use table::{Format, ResultsTable};
