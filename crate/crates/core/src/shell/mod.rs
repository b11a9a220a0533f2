//! File formats, configuration, reports and subcommand pipelines.

pub mod config;
pub mod files;
pub mod pipeline;
pub mod report;

pub use config::{RunConfig, SCHEMA};
pub use files::{
    format_number, load_efficiency_table, load_saturation, load_spectrum, load_trace, save_efficiency_table,
    save_spectrum, save_trace, CsvDoc, SaturationData,
};
pub use pipeline::{exit_code, run_pipeline, Command};
pub use report::{Report, ReportFormat, Source, Value};
