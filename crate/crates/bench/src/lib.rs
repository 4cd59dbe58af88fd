//! Monte-Carlo experiments for the sapd estimator: accuracy against SNR,
//! resolution against separation, source-count scaling, per-frame
//! throughput and the hidden-source patch scene, with CSV and JSON output.

pub mod calibrate;
pub mod error;
pub mod metrics;
pub mod output;
pub mod presets;
pub mod runner;
pub mod spec;

pub use calibrate::{calibrate, Calibration};
pub use error::{BenchError, Result};
pub use metrics::{matched_squared_error, LatencyStats, ResultRow, TrialOutcome};
pub use presets::{preset, Check, CheckOutcome, Preset, PresetRun, PRESET_NAMES};
pub use runner::{
    completion_curve, run_patch_scenario, run_resolution_sweep, run_rmse_sweep, run_source_count_sweep, run_sweep,
    run_throughput, CompletionPoint,
};
pub use spec::{ExperimentSpec, Scenario, SceneModel, Sweep, SweepVariable};
