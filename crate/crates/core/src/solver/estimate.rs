use std::time::{Duration, Instant};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::params::SolverParams;
use super::patch::{greedy_patch, power_levels};
use super::refine::bisection_refine;
use super::search::{sapd_search, RoiSet};
use crate::array::ArrayConfig;
use crate::error::Result;
use crate::num::Real;
use crate::spectrum::{bartlett_spectrum, initialize};

/// Final off-grid estimate with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EstimateDoc<T>", from = "EstimateDoc<T>", bound = "T: Real")]
pub struct DoaEstimate<T> {
    /// Ascending, degrees.
    pub angles: Vec<T>,
    pub amplitudes: Vec<Complex<T>>,
    pub residual: T,
    pub iterations: usize,
    pub bisection_steps: usize,
    pub patch_rounds: usize,
    pub elapsed: Duration,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct EstimateDoc<T> {
    angles_deg: Vec<T>,
    amplitudes_re: Vec<T>,
    amplitudes_im: Vec<T>,
    residual: T,
    iterations: usize,
    bisection_steps: usize,
    patch_rounds: usize,
    elapsed_us: f64,
    converged: bool,
}

impl<T: Real> From<DoaEstimate<T>> for EstimateDoc<T> {
    fn from(e: DoaEstimate<T>) -> Self {
        Self {
            amplitudes_re: e.amplitudes.iter().map(|z| z.re).collect(),
            amplitudes_im: e.amplitudes.iter().map(|z| z.im).collect(),
            angles_deg: e.angles,
            residual: e.residual,
            iterations: e.iterations,
            bisection_steps: e.bisection_steps,
            patch_rounds: e.patch_rounds,
            elapsed_us: e.elapsed.as_secs_f64() * 1e6,
            converged: e.converged,
        }
    }
}

impl<T: Real> From<EstimateDoc<T>> for DoaEstimate<T> {
    fn from(d: EstimateDoc<T>) -> Self {
        Self {
            angles: d.angles_deg,
            amplitudes: d
                .amplitudes_re
                .into_iter()
                .zip(d.amplitudes_im)
                .map(|(re, im)| Complex::new(re, im))
                .collect(),
            residual: d.residual,
            iterations: d.iterations,
            bisection_steps: d.bisection_steps,
            patch_rounds: d.patch_rounds,
            elapsed: Duration::from_secs_f64((d.elapsed_us.max(0.0)) * 1e-6),
            converged: d.converged,
        }
    }
}

impl<T: Real> DoaEstimate<T> {
    /// No sources detected.
    pub fn empty() -> Self {
        Self {
            angles: Vec::new(),
            amplitudes: Vec::new(),
            residual: T::zero(),
            iterations: 0,
            bisection_steps: 0,
            patch_rounds: 0,
            elapsed: Duration::ZERO,
            converged: true,
        }
    }

    /// Sorts the angles (carrying amplitudes along); other diagnostics zero.
    pub(crate) fn from_fit(angles: Vec<T>, amplitudes: Vec<Complex<T>>, residual: T, steps: usize, converged: bool) -> Self {
        let mut pairs: Vec<(T, Complex<T>)> = angles.into_iter().zip(amplitudes).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self {
            angles: pairs.iter().map(|p| p.0).collect(),
            amplitudes: pairs.iter().map(|p| p.1).collect(),
            residual,
            iterations: 0,
            bisection_steps: steps,
            patch_rounds: 0,
            elapsed: Duration::ZERO,
            converged,
        }
    }

    pub fn num_sources(&self) -> usize {
        self.angles.len()
    }
}

/// Probability that a noise-only residual passes the threshold derived from
/// a known noise variance.
pub const NOISE_PASS_PROBABILITY: f64 = 0.999;

/// Residual threshold in use. An explicit `epsilon` wins; with a known noise
/// variance `σ²` it is the [`NOISE_PASS_PROBABILITY`] quantile of `‖n‖`
/// over all `M` elements; otherwise `3·σ̂·√M` with `σ̂² = n_f / M`.
pub fn recovery_threshold<T: Real>(params: &SolverParams<T>, num_elements: usize, noise_power: T) -> T {
    if let Some(e) = params.epsilon {
        return e;
    }
    match params.noise_variance {
        Some(v) => {
            let dof = 2.0 * num_elements as f64;
            let q = ChiSquared::new(dof)
                .expect("positive degrees of freedom")
                .inverse_cdf(NOISE_PASS_PROBABILITY);
            (v * T::of(q / 2.0)).sqrt()
        }
        None => T::of(3.0) * noise_power.max(T::zero()).sqrt(),
    }
}

/// Full pipeline for one snapshot: spectrum initialization, then grid
/// search with bisection refinement, greedy patching while the refined
/// residual stays above the recovery threshold, and finally removal of
/// elements the threshold does not need.
///
/// Elements are removed only by local refinement of the others, so a
/// smaller support never wanders away from the searched one.
///
/// When patching runs out of options the last searched support is refined
/// and returned with `converged = false`.
pub fn estimate<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], params: &SolverParams<T>) -> Result<DoaEstimate<T>> {
    let start = Instant::now();
    params.validate()?;
    cfg.validate()?;
    let spectrum = bartlett_spectrum(cfg, y)?;
    let mut init = initialize(&spectrum, &params.spectrum);
    if init.is_empty() {
        let mut e = DoaEstimate::empty();
        e.residual = crate::linalg::norm2(y);
        e.elapsed = start.elapsed();
        return Ok(e);
    }
    let epsilon = recovery_threshold(params, cfg.num_elements, init.noise_power);
    let levels = power_levels(&spectrum, &init, &params.benchmarks);
    let capacity = cfg.num_elements - 1;

    let mut iterations = 0;
    let mut patch_rounds = 0;
    let (mut found, accepted) = loop {
        let (spent, mut found) = search_from(cfg, y, &init.indices, params)?;
        iterations += spent;
        // a sub-support that fits better may hide inside this one
        while !(found.est.residual < epsilon) {
            let bar = found.est.residual;
            match drop_redundant(cfg, y, &found, params, bar, Reduction::Search) {
                Some(smaller) => {
                    iterations += smaller.0;
                    found = smaller.1;
                }
                None => break,
            }
        }
        if found.est.residual < epsilon {
            break (found, true);
        }
        let patched = levels.and_then(|l| greedy_patch(&spectrum, &mut init, &l, params, capacity));
        if patched.is_none() {
            break (found, false);
        }
        patch_rounds += 1;
    };

    if accepted {
        loop {
            let mut shrunk = false;
            while let Some((_, smaller)) = drop_redundant(cfg, y, &found, params, epsilon, Reduction::Local) {
                found = smaller;
                shrunk = true;
            }
            if !shrunk {
                break;
            }
            // survivors were held inside their old regions; let them move
            let (spent, moved) = search_from(cfg, y, &found.indices, params)?;
            iterations += spent;
            if !(moved.est.residual < found.est.residual) {
                break;
            }
            found = moved;
        }
    }

    let mut est = found.est;
    est.converged = est.converged && accepted && found.searched;
    est.iterations = iterations;
    est.patch_rounds = patch_rounds;
    est.elapsed = start.elapsed();
    Ok(est)
}

/// A refined support with the regions it was refined in.
struct Candidate<T> {
    /// Grid indices the refinement started from, sorted.
    indices: Vec<usize>,
    rois: RoiSet<T>,
    est: DoaEstimate<T>,
    /// The grid search behind it converged.
    searched: bool,
}

/// Grid search from `indices` followed by refinement, with the search
/// iterations spent.
fn search_from<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    indices: &[usize],
    params: &SolverParams<T>,
) -> Result<(usize, Candidate<T>)> {
    let outcome = sapd_search(cfg, y, indices, params)?;
    let est = bisection_refine(cfg, y, &outcome.rois, params)?;
    Ok((
        outcome.iterations,
        Candidate {
            indices: outcome.support.indices,
            est,
            rois: outcome.rois,
            searched: outcome.converged,
        },
    ))
}

#[derive(Clone, Copy)]
enum Reduction {
    /// Search again from the remaining grid indices.
    Search,
    /// Refine the remaining elements inside their own regions only.
    Local,
}

/// Tries the support without each element in turn, weakest amplitude
/// first. Returns the first smaller support whose residual is below `bar`,
/// with the search iterations spent.
fn drop_redundant<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    found: &Candidate<T>,
    params: &SolverParams<T>,
    bar: T,
    how: Reduction,
) -> Option<(usize, Candidate<T>)> {
    let n = found.indices.len();
    if n < 2 || found.est.amplitudes.len() != n || found.rois.intervals.len() != n {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let amp = |i: usize| found.est.amplitudes[i].norm();
    order.sort_by(|&a, &b| amp(a).partial_cmp(&amp(b)).unwrap_or(std::cmp::Ordering::Equal));
    let mut spent = 0;
    order.into_iter().find_map(|skip| {
        let smaller = match how {
            Reduction::Search => {
                let mut rest = found.indices.clone();
                rest.remove(skip);
                let (iters, c) = search_from(cfg, y, &rest, params).ok()?;
                spent += iters;
                c
            }
            Reduction::Local => {
                let mut rois = found.rois.clone();
                rois.intervals.remove(skip);
                let mut indices = found.indices.clone();
                indices.remove(skip);
                Candidate {
                    indices,
                    est: bisection_refine(cfg, y, &rois, params).ok()?,
                    rois,
                    searched: found.searched,
                }
            }
        };
        (smaller.est.residual < bar).then_some((spent, smaller))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, synthesize_snapshot, Scene};

    fn cfg() -> ArrayConfig<f64> {
        ArrayConfig::default()
    }

    #[test]
    fn json_field_names() {
        let est = DoaEstimate::from_fit(vec![8.0, 0.0], vec![Complex::new(1.0, 2.0), Complex::new(3.0, -4.0)], 0.5, 3, true);
        assert_eq!(est.angles, vec![0.0, 8.0]);
        let v: serde_json::Value = serde_json::to_value(&est).unwrap();
        for key in [
            "angles_deg",
            "amplitudes_re",
            "amplitudes_im",
            "residual",
            "iterations",
            "bisection_steps",
            "patch_rounds",
            "elapsed_us",
            "converged",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["amplitudes_im"][0], -4.0);
        let back: DoaEstimate<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn noiseless_pair_recovered() {
        let c = cfg();
        let scene = Scene::with_real_amplitudes(vec![-3.0, 9.0], &[30.0, 30.0], f64::INFINITY);
        let y = synthesize_snapshot(&c, &scene, 0).unwrap().data;
        let est = estimate(&c, &y, &SolverParams::default()).unwrap();
        assert_eq!(est.num_sources(), 2);
        assert!((est.angles[0] + 3.0).abs() < 1e-6 && (est.angles[1] - 9.0).abs() < 1e-6, "{:?}", est.angles);
        assert!(est.converged);
    }

    #[test]
    fn zero_snapshot_gives_no_targets() {
        let y = vec![Complex::new(0.0, 0.0); 8];
        let est = estimate(&cfg(), &y, &SolverParams::default()).unwrap();
        assert_eq!(est.num_sources(), 0);
        assert!(est.converged);
    }

    #[test]
    fn huge_epsilon_accepts_first_pass() {
        let c = cfg();
        let y = steering_vector(&c, 4.2);
        let params = SolverParams {
            epsilon: Some(1e9),
            ..SolverParams::default()
        };
        let est = estimate(&c, &y, &params).unwrap();
        assert_eq!(est.patch_rounds, 0);
        assert!(est.converged);
    }
}
