//! Pipeline orchestration, parameter search, aggregate reports and the
//! command-line front end for the embedding clustering toolkit.

pub mod aggregate;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod presets;
pub mod report;
pub mod search;
pub mod seeds;
pub mod table;

pub use error::{HarnessError, Result};
pub use grid::{evaluate_grid, GridDataset, GridOptions, GridSpec};
pub use pipeline::{run_pipeline, run_pipeline_with, PipelineOutput, RunOptions};
pub use presets::{Preset, CLUSTERERS};
pub use search::{staged_search, SearchDataset, SearchOutcome, SearchSpec, SearchStage};
pub use table::{Cell, FailedCell, ResultRow, ResultsTable};
