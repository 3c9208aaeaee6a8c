//! Configuration, run orchestration and file formats: time series CSV,
//! snapshots with JSON sidecars, SVG plots and JSON reports. Every file
//! carries the config hash.

mod config;
mod report;
mod run;
mod series;
mod snapshot;
mod svg;
mod verify;

pub use config::{
    parse_config, parse_config_str, resolve_output_dir, RunConfig, VerifyOptions, M0_CAP, OUTPUT_DIR_ENV,
};
pub use report::{report_dir, summarize, write_plots, RunSummary, SUMMARY_FILE};
pub use run::{
    initial_state, recorder_config, run_profile, run_table, simulate, simulate_to_dir, write_run, RunManifest,
    RunOutput, RunStats, CONFIG_FILE, MANIFEST_FILE, TIMESERIES_FILE,
};
pub use series::{header, read_timeseries, write_timeseries, write_timeseries_to};
pub use snapshot::{list_snapshots, load_snapshot, write_snapshot, SnapshotMeta, SNAPSHOT_HEADER};
pub use svg::render_svg;
pub use verify::{
    field_history, flow_bounds, random_probes, verify_dir, verify_output, verify_parts, CheckEntry, VerifyReport,
    REPORT_FILE,
};
