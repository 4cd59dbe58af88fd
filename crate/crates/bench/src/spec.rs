use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use sapd::{ArrayConfig, Method, Scene, SnrConvention, SolverParams};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Example1,
    Example2,
    Example3,
    Example4,
    Example5,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    /// Second source placed this many degrees above the first.
    SeparationDeg,
    /// Random scenes with this many well-separated sources.
    SourceCount,
    /// Range-Doppler cells processed back to back.
    Cells,
}

impl SweepVariable {
    /// CSV column header.
    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::SeparationDeg => "separation_deg",
            SweepVariable::SourceCount => "sources",
            SweepVariable::Cells => "cells",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(variable: SweepVariable, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            variable,
            values: values.into_iter().collect(),
        }
    }

    /// `start, start + step, ..` up to and including `stop`.
    pub fn range(variable: SweepVariable, start: f64, stop: f64, step: f64) -> Self {
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new(variable, (0..n).map(|i| start + step * i as f64))
    }
}

/// How each trial's scene is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneModel {
    /// Fixed source angles. A separation sweep keeps only the first.
    pub angles: Vec<f64>,
    /// `null` means noiseless.
    #[serde(with = "db_or_noiseless")]
    pub snr_db: f64,
    #[serde(default)]
    pub snr_convention: SnrConvention,
    /// Real source amplitudes drawn from `N(mean, std²)` per trial.
    pub amplitude_mean: f64,
    pub amplitude_std: f64,
    /// Shift every angle by one draw from `U(−Δθ/2, Δθ/2)`.
    #[serde(default)]
    pub off_grid: bool,
    /// Random scenes: minimum spacing and the interval they fill.
    pub min_separation: f64,
    pub angle_range: (f64, f64),
}

impl Default for SceneModel {
    fn default() -> Self {
        Self {
            angles: vec![0.0, 8.0],
            snr_db: 15.0,
            snr_convention: SnrConvention::PerElement,
            amplitude_mean: 30.0,
            amplitude_std: 1.0,
            off_grid: false,
            min_separation: 15.0,
            angle_range: (-55.0, 55.0),
        }
    }
}

mod db_or_noiseless {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One Monte-Carlo experiment: a sweep over one scene variable, a set of
/// estimators and the trials run at every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub sweep: Sweep,
    pub trials: usize,
    pub base_seed: u64,
    pub estimators: Vec<Method>,
    #[serde(default)]
    pub array: ArrayConfig<f64>,
    #[serde(default)]
    pub scene: SceneModel,
    /// `key=value` overrides applied to the default solver parameters.
    #[serde(default)]
    pub params: Vec<String>,
    /// Hand the true noise variance to the estimators.
    #[serde(default)]
    pub known_noise: bool,
}

pub const DEFAULT_TRIALS: usize = 1000;

impl ExperimentSpec {
    pub fn new(scenario: Scenario, sweep: Sweep) -> Self {
        Self {
            scenario,
            sweep,
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            estimators: vec![Method::Sapd],
            array: ArrayConfig::default(),
            scene: SceneModel::default(),
            params: Vec::new(),
            known_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sweep.values.is_empty() {
            return bad("sweep range is empty".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite() && self.sweep.variable != SweepVariable::SnrDb) {
            return bad("sweep values must be finite".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        if !self.scene.amplitude_std.is_finite() || self.scene.amplitude_std < 0.0 || !self.scene.amplitude_mean.is_finite() {
            return bad("amplitude distribution must have finite mean and non-negative spread".into());
        }
        self.array.validate()?;
        self.solver_params()?;
        let fixed = match self.sweep.variable {
            SweepVariable::SeparationDeg => 1,
            SweepVariable::SourceCount => 0,
            _ => self.scene.angles.len(),
        };
        if fixed > 0 && self.scene.angles.is_empty() {
            return bad("scene has no angles".into());
        }
        if self.sweep.variable == SweepVariable::SourceCount {
            let (lo, hi) = self.scene.angle_range;
            for &k in &self.sweep.values {
                if k < 1.0 || k.fract() != 0.0 {
                    return bad(format!("source count {k} is not a positive integer"));
                }
                if (k - 1.0) * self.scene.min_separation > hi - lo {
                    return bad(format!("{k} sources spaced {}° do not fit in [{lo}, {hi}]", self.scene.min_separation));
                }
            }
        }
        Ok(())
    }

    /// Default solver parameters with [`Self::params`] applied in order.
    pub fn solver_params(&self) -> Result<SolverParams<f64>> {
        let mut p = SolverParams::default();
        for kv in &self.params {
            let (k, v) = split_override(kv)?;
            p.set(k, v)?;
        }
        Ok(p)
    }

    /// Applies one `key=value` override. Unknown keys are forwarded to the
    /// solver parameters.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse()
                .map_err(|_| BenchError::InvalidSpec(format!("{key}: cannot parse {v:?}")))
        };
        let flag = |v: &str| -> Result<bool> {
            v.trim()
                .parse()
                .map_err(|_| BenchError::InvalidSpec(format!("{key}: expected true or false, got {v:?}")))
        };
        match key {
            "trials" => self.trials = num(value)? as usize,
            "base_seed" | "seed" => self.base_seed = num(value)? as u64,
            "snr_db" => self.scene.snr_db = if value == "inf" { f64::INFINITY } else { num(value)? },
            "off_grid" => self.scene.off_grid = flag(value)?,
            "known_noise" => self.known_noise = flag(value)?,
            "amplitude_mean" => self.scene.amplitude_mean = num(value)?,
            "amplitude_std" => self.scene.amplitude_std = num(value)?,
            "angles" => {
                self.scene.angles = value.split(',').map(num).collect::<Result<_>>()?;
            }
            "sweep" => {
                self.sweep.values = value.split(',').map(num).collect::<Result<_>>()?;
            }
            "estimators" => {
                self.estimators = value.split(',').map(|m| parse_method(m.trim())).collect::<Result<_>>()?;
            }
            _ => {
                let mut probe = self.solver_params()?;
                probe.set(key, value)?;
                self.params.push(format!("{key}={value}"));
            }
        }
        self.validate()
    }

    /// Scene for trial `trial` at sweep point `value`. Angles and amplitudes
    /// come from their own stream of the trial seed, so they never share
    /// draws with the noise.
    pub fn trial_scene(&self, value: f64, trial: usize) -> Scene<f64> {
        let m = &self.scene;
        let mut rng = ChaCha8Rng::seed_from_u64(self.trial_seed(trial));
        rng.set_stream(1);
        let mut angles = match self.sweep.variable {
            SweepVariable::SeparationDeg => vec![m.angles[0], m.angles[0] + value],
            SweepVariable::SourceCount => spaced_angles(&mut rng, value as usize, m.min_separation, m.angle_range),
            _ => m.angles.clone(),
        };
        if m.off_grid {
            let half = self.array.grid_step / 2.0;
            let bias = rng.random_range(-half..half);
            angles.iter_mut().for_each(|a| *a += bias);
        }
        let normal = Normal::new(m.amplitude_mean, m.amplitude_std).expect("validated amplitude spread");
        let amplitudes: Vec<f64> = angles.iter().map(|_| normal.sample(&mut rng)).collect();
        let snr = match self.sweep.variable {
            SweepVariable::SnrDb => value,
            _ => m.snr_db,
        };
        Scene::with_real_amplitudes(angles, &amplitudes, snr).with_convention(m.snr_convention)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }
}

/// Sorted integer angles in `range`, consecutive ones at least `sep` apart,
/// uniform over such arrangements up to rounding.
fn spaced_angles(rng: &mut ChaCha8Rng, k: usize, sep: f64, range: (f64, f64)) -> Vec<f64> {
    let lo = range.0.ceil();
    let sep = sep.ceil();
    let slack = (range.1.floor() - lo - sep * (k.saturating_sub(1)) as f64).max(0.0);
    let mut u: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=slack).round()).collect();
    u.sort_by(f64::total_cmp);
    u.iter().enumerate().map(|(i, &x)| lo + x + sep * i as f64).collect()
}

pub fn split_override(kv: &str) -> Result<(&str, &str)> {
    kv.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| BenchError::InvalidSpec(format!("expected key=value, got {kv:?}")))
}

pub fn parse_method(name: &str) -> Result<Method> {
    match name {
        "sapd" => Ok(Method::Sapd),
        "omp" => Ok(Method::Omp),
        "dml" => Ok(Method::Dml),
        other => Err(BenchError::InvalidSpec(format!("unknown estimator {other:?}"))),
    }
}
