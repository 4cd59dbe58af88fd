use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use sapd::Method;

use crate::calibrate::Calibration;
use crate::error::{BenchError, Result};
use crate::metrics::ResultRow;
use crate::runner::{run_sweep, run_throughput};
use crate::spec::{ExperimentSpec, Scenario, Sweep, SweepVariable};

/// Solver settings shared by every preset: beam power levels from the known
/// mean source amplitude. Presets also hand SAPD the noise variance, as a
/// detector's noise estimate would; the source count stays unknown.
pub const PRESET_PARAMS: &[&str] = &["amplitude_prior=30"];

pub const PRESET_NAMES: [&str; 6] = [
    "example1_throughput",
    "example2_ongrid",
    "example2_offgrid",
    "example3_resolution",
    "example4_sources",
    "example5_patch",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    SuccessRate,
    /// `1 − cardinality_failure_rate`.
    CardinalityRate,
    MeanPatchRounds,
    /// Seconds; compared against a calibrated limit.
    MedianLatency,
    RmseOverCrlb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtLeast(f64),
    AtMost(f64),
    Above(f64),
    Within(f64, f64),
    /// At most this many seconds times the machine's calibration scale.
    ScaledAtMost(f64),
}

impl Bound {
    fn holds(self, v: f64, cal: &Calibration) -> bool {
        match self {
            Bound::AtLeast(b) => v >= b,
            Bound::AtMost(b) => v <= b,
            Bound::Above(b) => v > b,
            Bound::Within(lo, hi) => (lo..=hi).contains(&v),
            Bound::ScaledAtMost(b) => v <= cal.limit(b),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::AtLeast(b) => write!(f, ">= {b}"),
            Bound::AtMost(b) => write!(f, "<= {b}"),
            Bound::Above(b) => write!(f, "> {b}"),
            Bound::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
            Bound::ScaledAtMost(b) => write!(f, "<= {b} s x scale"),
        }
    }
}

/// A threshold on one metric of one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub method: Method,
    pub at: f64,
    pub metric: Metric,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub label: String,
    pub value: Option<f64>,
    pub bound: String,
    pub passed: bool,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let value = match self.value {
            None => "n/a".to_string(),
            Some(v) if v != 0.0 && v.abs() < 1e-3 => format!("{v:.3e}"),
            Some(v) => format!("{v:.4}"),
        };
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {value} (want {})", self.label, self.bound)
    }
}

impl Check {
    fn new(label: &str, method: Method, at: f64, metric: Metric, bound: Bound) -> Self {
        Self {
            label: label.to_string(),
            method,
            at,
            metric,
            bound,
        }
    }

    /// A check whose row or value is missing fails.
    pub fn evaluate(&self, rows: &[ResultRow], cal: &Calibration) -> CheckOutcome {
        let row = rows
            .iter()
            .find(|r| r.method == self.method && (r.sweep_value - self.at).abs() < 1e-9);
        let value = row.and_then(|r| match self.metric {
            Metric::Rmse => r.rmse_deg,
            Metric::SuccessRate => Some(r.success_rate),
            Metric::CardinalityRate => Some(1.0 - r.cardinality_failure_rate),
            Metric::MeanPatchRounds => Some(r.mean_patch_rounds),
            Metric::MedianLatency => Some(r.latency_median_s),
            Metric::RmseOverCrlb => match (r.rmse_deg, r.crlb_deg) {
                (Some(e), Some(b)) if b > 0.0 => Some(e / b),
                _ => None,
            },
        });
        let bound = match self.bound {
            Bound::ScaledAtMost(b) => format!("<= {:.4} s", cal.limit(b)),
            other => other.to_string(),
        };
        CheckOutcome {
            label: self.label.clone(),
            value,
            bound,
            passed: value.is_some_and(|v| self.bound.holds(v, cal)),
        }
    }
}

/// A named experiment with its acceptance thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub spec: ExperimentSpec,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRun {
    pub rows: Vec<ResultRow>,
    pub checks: Vec<CheckOutcome>,
    pub elapsed_s: f64,
}

impl PresetRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs a spec with the operation matching its sweep variable.
pub fn run_spec(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    match spec.sweep.variable {
        SweepVariable::Cells => run_throughput(spec),
        _ => run_sweep(spec),
    }
}

impl Preset {
    pub fn run(&self, cal: &Calibration) -> Result<PresetRun> {
        let start = Instant::now();
        let rows = run_spec(&self.spec)?;
        let elapsed_s = start.elapsed().as_secs_f64();
        let checks = self.checks.iter().map(|c| c.evaluate(&rows, cal)).collect();
        Ok(PresetRun { rows, checks, elapsed_s })
    }
}

fn base(scenario: Scenario, sweep: Sweep) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(scenario, sweep);
    spec.params = PRESET_PARAMS.iter().map(|s| s.to_string()).collect();
    spec.known_noise = true;
    spec
}

pub fn preset(name: &str) -> Result<Preset> {
    use Bound::*;
    use Method::*;
    use Metric::*;
    let (spec, checks) = match name {
        "example1_throughput" => {
            let mut spec = base(Scenario::Example1, Sweep::new(SweepVariable::Cells, [1.0, 10.0, 20.0, 30.0, 40.0, 50.0]));
            spec.trials = 50;
            let checks = vec![
                Check::new("one cell within 1 ms", Sapd, 1.0, MedianLatency, ScaledAtMost(1e-3)),
                Check::new("50-cell frame within 75 ms", Sapd, 50.0, MedianLatency, ScaledAtMost(75e-3)),
            ];
            (spec, checks)
        }
        "example2_ongrid" => {
            let mut spec = base(Scenario::Example2, Sweep::range(SweepVariable::SnrDb, -5.0, 25.0, 5.0));
            spec.estimators = vec![Sapd, Omp];
            let mut checks = vec![
                Check::new("on-grid RMSE at 15 dB", Sapd, 15.0, Rmse, Within(0.13, 0.30)),
                Check::new("OMP RMSE at 15 dB", Omp, 15.0, Rmse, Above(3.0)),
            ];
            for snr in [15.0, 20.0, 25.0] {
                checks.push(Check::new(&format!("RMSE / CRLB at {snr} dB"), Sapd, snr, RmseOverCrlb, AtMost(2.0)));
            }
            (spec, checks)
        }
        "example2_offgrid" => {
            let mut spec = base(Scenario::Example2, Sweep::range(SweepVariable::SnrDb, -5.0, 25.0, 5.0));
            spec.scene.off_grid = true;
            let checks = vec![Check::new("off-grid RMSE at 15 dB", Sapd, 15.0, Rmse, AtMost(0.35))];
            (spec, checks)
        }
        "example3_resolution" => {
            let spec = base(Scenario::Example3, Sweep::range(SweepVariable::SeparationDeg, 2.0, 16.0, 1.0));
            let checks = vec![
                Check::new("success at 6 deg", Sapd, 6.0, SuccessRate, AtLeast(0.95)),
                Check::new("success at 2 deg", Sapd, 2.0, SuccessRate, AtLeast(0.60)),
            ];
            (spec, checks)
        }
        "example4_sources" => {
            let spec = base(Scenario::Example4, Sweep::range(SweepVariable::SourceCount, 2.0, 7.0, 1.0));
            let checks = (2..=7)
                .map(|k| Check::new(&format!("{k} sources within 1 ms"), Sapd, k as f64, MedianLatency, ScaledAtMost(1e-3)))
                .collect();
            (spec, checks)
        }
        "example5_patch" => {
            let mut spec = base(Scenario::Example5, Sweep::new(SweepVariable::SnrDb, [15.0]));
            spec.scene.angles = vec![-30.0, -20.0, -10.0, 37.0, 45.0];
            let checks = vec![
                Check::new("five-source count correct", Sapd, 15.0, CardinalityRate, AtLeast(0.90)),
                Check::new("five-source RMSE", Sapd, 15.0, Rmse, AtMost(0.5)),
                Check::new("mean patch rounds", Sapd, 15.0, MeanPatchRounds, AtLeast(1.0)),
            ];
            (spec, checks)
        }
        other => return Err(BenchError::UnknownPreset(other.to_string())),
    };
    Ok(Preset {
        name: name.to_string(),
        spec,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_preset_is_valid() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.spec.validate().unwrap();
            for c in &p.checks {
                assert!(p.spec.sweep.values.iter().any(|v| (v - c.at).abs() < 1e-9), "{name}: {}", c.label);
                assert!(p.spec.estimators.contains(&c.method), "{name}: {}", c.label);
            }
        }
        assert!(matches!(preset("example9"), Err(BenchError::UnknownPreset(_))));
    }

    #[test]
    fn missing_row_fails_check() {
        let cal = Calibration { measured_gflops: 1.0, scale: 1.0 };
        let c = Check::new("x", Method::Sapd, 15.0, Metric::Rmse, Bound::AtMost(1.0));
        let out = c.evaluate(&[], &cal);
        assert!(!out.passed);
        assert_eq!(out.value, None);
        assert!(out.to_string().starts_with("FAIL x: n/a"));
    }
}
