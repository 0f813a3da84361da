//! Configuration, data ingestion, sweep and output for the command-line tool.

pub mod config;
pub mod ingest;
pub mod output;
pub mod sweep;

pub use config::{ConfigFile, DeltaGrid, Engine, Pattern, PatternSelection, ReasonDeparture, RunConfig};
pub use ingest::{dataset_from_table, impute_baseline_mean, load_dataset, summarize, DatasetSummary, RawTable};
pub use output::{emit_results, render};
pub use sweep::{delta_for, run_sweep, EngineUsed, SweepRow};
