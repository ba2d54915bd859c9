//! Library half of the `fastde` binary: experiment configs, alpha sweeps
//! and their CSV and SVG outputs.

pub mod config;
pub mod csv;
pub mod error;
pub mod svg;
pub mod sweep;

pub use config::{parse_config, parse_config_with, ExperimentConfig, SolverChoice, SolverKind};
pub use csv::{emit_csv, load_csv, parse_csv, render_csv};
pub use error::{CliError, ConfigError, Result};
pub use svg::{emit_svg_plot, gap_path, render_svg, PlotField};
pub use sweep::{run_sweep, solve_with, SweepRow};
