#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Single-snapshot direction-of-arrival estimation for uniform linear arrays.

pub mod array;
pub mod baselines;
pub mod error;
pub mod linalg;
pub mod num;
mod serde_util;
pub mod solver;
pub mod spectrum;

pub use array::{ArrayConfig, Grid, Scene, SnrConvention, Snapshot};
pub use error::{DoaError, Result};
pub use num::Real;
pub use spectrum::{BeamFeature, Initialization, NoiseFloor, Peak, SpatialSpectrum, SpectrumParams};
pub use solver::{estimate, DoaEstimate, PowerBenchmarks, SolverParams};
pub use baselines::{BaselineResult, Method};

pub type ArrayConfig64 = ArrayConfig<f64>;
pub type ArrayConfig32 = ArrayConfig<f32>;
pub type Scene64 = Scene<f64>;
pub type Scene32 = Scene<f32>;
pub type SolverParams64 = SolverParams<f64>;
pub type SolverParams32 = SolverParams<f32>;
pub type DoaEstimate64 = DoaEstimate<f64>;
pub type DoaEstimate32 = DoaEstimate<f32>;
