//! File ingestion, run configuration and report rendering.

mod config;
mod report;
mod tables;

pub use config::{parse_regressor, OutputMode, RunConfig};
pub use report::{emit_report, parse_json, render_json, render_text, Rendered};
pub use tables::{
    parse_events_csv, parse_panel_csv, parse_scores_csv, read_events_csv, read_panel_csv,
    read_scores_csv,
};

use crate::error::Result;
use crate::study::{replicate, ReportBundle};

/// Loads every input named by `config` and runs the replication.
pub fn run(config: &RunConfig) -> Result<ReportBundle> {
    let panel = read_panel_csv(&config.data_path)?;
    let scores = read_scores_csv(&config.scores_path)?;
    let horizon = config.horizon_end.unwrap_or_else(|| panel.last_year());
    let calendar = read_events_csv(&config.events_path, horizon)?;
    replicate(&panel, &scores, &calendar, &config.replication)
}
