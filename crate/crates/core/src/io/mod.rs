//! Run configuration and report serialization.

mod config;
mod output;

pub use config::{parse_config, InitialDatum, Outputs, RunConfig};
pub use output::{
    parse_series_csv, plot_svg, series_csv, snapshot_json, sweep_csv, write_json, write_plot,
    write_series, write_snapshot, write_sweep, SERIES_HEADER, SWEEP_HEADER,
};
