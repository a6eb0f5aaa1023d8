//! Manufactured examples, parameter sweeps, and reporting.

pub mod cli;
mod config;
mod examples;
pub mod selftest;
mod sweep;

pub use config::{CustomData, ExampleSel, Mode, RunConfig, Tolerances};
pub use examples::{build_example, build_example1, build_example2, ExampleErrors, ExampleId, ManufacturedExample};
pub use sweep::{
    build_case, estimate_order, fmt_float, rows_to_csv, run_case, run_sweep, sweep_file_name, write_sweep, Case,
    ExperimentRow, RowStatus, CSV_HEADER,
};
