//! The sparse grid-search estimator and its building blocks.

mod estimate;
mod ls;
mod params;
mod patch;
mod refine;
mod search;

pub use estimate::{estimate, recovery_threshold, DoaEstimate};
pub use ls::{amplitudes_and_beta, ls_amplitudes, ls_fit, pseudo_derivative, residual, sign_constraint};
pub use params::{PowerBenchmarks, SolverParams};
pub use patch::{greedy_patch, power_levels, valley_is_elevated, Augmentation, PowerLevels};
pub use refine::{bisection_refine, default_bisection_tol};
pub use search::{evaluate_support, sapd_search, search_step, RoiSet, SearchOutcome, SupportState};
