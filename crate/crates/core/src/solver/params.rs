use crate::error::{DoaError, Result};
use crate::num::Real;
use crate::spectrum::SpectrumParams;

/// Reference peak powers of beams holding one, two and three sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerBenchmarks<T> {
    /// Calibrated per snapshot from the strongest single-source beam.
    Auto,
    /// Expected source amplitude `|s̄|`; the one-source level is `M²|s̄|²`.
    AmplitudePrior(T),
    Explicit { single: T, double: T, triple: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams<T> {
    pub spectrum: SpectrumParams<T>,
    /// Step multiplier when `|β|` exceeds one grid step.
    pub n1: u32,
    /// Step used when `|β|` lies between half a grid step and one step.
    pub n2: u32,
    /// Residual norm below which a support is accepted. `None` derives it
    /// from [`Self::noise_variance`] when known, else from the noise floor;
    /// see [`super::recovery_threshold`].
    pub epsilon: Option<T>,
    /// Per-element noise variance when known upstream (for example from the
    /// detector's noise estimate).
    pub noise_variance: Option<T>,
    /// Spectral valleys whose minimum is within this many dB of the noise
    /// floor are not searched for hidden sources.
    pub epsilon_p_db: T,
    pub max_iters: usize,
    /// Final ROI width in degrees. `None` means an eighth of the grid step.
    pub bisection_tol: Option<T>,
    /// Support elements with `|x_i| < amplitude_floor · max|x|` are pruned.
    pub amplitude_floor: T,
    pub benchmarks: PowerBenchmarks<T>,
    /// Extra `θ ← θ + β` corrections after bisection.
    pub polish_iters: usize,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        Self {
            spectrum: SpectrumParams::default(),
            n1: 2,
            n2: 2,
            epsilon: None,
            noise_variance: None,
            epsilon_p_db: T::of(3.0),
            max_iters: 30,
            bisection_tol: None,
            amplitude_floor: T::of(1e-3),
            benchmarks: PowerBenchmarks::Auto,
            polish_iters: 8,
        }
    }
}

impl<T: Real> SolverParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DoaError::InvalidConfig(msg.to_string()));
        if self.n1 == 0 || self.n2 == 0 {
            return bad("step multipliers n1 and n2 must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if let Some(e) = self.epsilon {
            if !(e > T::zero()) {
                return bad("epsilon must be positive");
            }
        }
        if let Some(v) = self.noise_variance {
            if !(v >= T::zero()) {
                return bad("noise_variance must be non-negative");
            }
        }
        if let Some(t) = self.bisection_tol {
            if !(t > T::zero()) {
                return bad("bisection_tol must be positive");
            }
        }
        if !(self.epsilon_p_db > T::zero()) {
            return bad("epsilon_p_db must be positive");
        }
        if !(self.amplitude_floor >= T::zero() && self.amplitude_floor < T::one()) {
            return bad("amplitude_floor must lie in [0, 1)");
        }
        match self.benchmarks {
            PowerBenchmarks::Explicit { single, double, triple } => {
                if !(T::zero() < single && single < double && double < triple) {
                    return bad("power benchmarks must satisfy 0 < single < double < triple");
                }
            }
            PowerBenchmarks::AmplitudePrior(a) => {
                if !(a > T::zero()) {
                    return bad("amplitude prior must be positive");
                }
            }
            PowerBenchmarks::Auto => {}
        }
        Ok(())
    }

    /// Applies one `key=value` override. Benchmarks accept `auto`, a single
    /// amplitude via `amplitude_prior`, or the three linear levels via
    /// `power_benchmarks=s1,s2,s3`. An override that fails to parse or
    /// validate leaves the parameters unchanged.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut next = *self;
        next.apply(key, value)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let real = |v: &str| -> Result<T> {
            v.trim()
                .parse::<f64>()
                .map(T::of)
                .map_err(|_| DoaError::InvalidConfig(format!("{key}: cannot parse {v:?} as a number")))
        };
        let count = |v: &str| -> Result<usize> {
            v.trim()
                .parse::<usize>()
                .map_err(|_| DoaError::InvalidConfig(format!("{key}: cannot parse {v:?} as a count")))
        };
        match key {
            "n1" => self.n1 = count(value)? as u32,
            "n2" => self.n2 = count(value)? as u32,
            "epsilon" => {
                self.epsilon = if value == "auto" { None } else { Some(real(value)?) };
            }
            "noise_variance" => {
                self.noise_variance = if value == "auto" { None } else { Some(real(value)?) };
            }
            "epsilon_p_db" => self.epsilon_p_db = real(value)?,
            "max_iters" => self.max_iters = count(value)?,
            "bisection_tol" => {
                self.bisection_tol = if value == "auto" { None } else { Some(real(value)?) };
            }
            "amplitude_floor" => self.amplitude_floor = real(value)?,
            "polish_iters" => self.polish_iters = count(value)?,
            "eta_db" => self.spectrum.eta_db = real(value)?,
            "threshold_offset_db" => self.spectrum.threshold_offset_db = real(value)?,
            "amplitude_prior" => self.benchmarks = PowerBenchmarks::AmplitudePrior(real(value)?),
            "power_benchmarks" => {
                if value == "auto" {
                    self.benchmarks = PowerBenchmarks::Auto;
                } else {
                    let levels = value.split(',').map(real).collect::<Result<Vec<T>>>()?;
                    let [single, double, triple] = levels[..] else {
                        return Err(DoaError::InvalidConfig(
                            "power_benchmarks expects three comma-separated values".into(),
                        ));
                    };
                    self.benchmarks = PowerBenchmarks::Explicit { single, double, triple };
                }
            }
            _ => return Err(DoaError::InvalidConfig(format!("unknown solver parameter {key:?}"))),
        }
        Ok(())
    }
}
