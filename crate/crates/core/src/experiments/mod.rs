//! Experiment orchestration: configuration, study drivers, slope fits, and
//! CSV emission with reproducibility metadata.

pub mod config;
pub mod csvio;
pub mod slope;
pub mod studies;

pub use config::{version_string, ConfigError, ExperimentConfig, RunMeta, OUT_DIR_ENV};
pub use csvio::{emit_csv, emit_plot_script, fmt_f64, read_csv, CsvError};
pub use slope::{fit_slope, SlopeError, SlopeFit};
pub use studies::{
    run_deriv_scan, run_gap_scan, run_qmc_convergence, run_truncation, DerivScanResult,
    GapScanResult, QmcRateResult, StudyError, TruncationResult,
};
