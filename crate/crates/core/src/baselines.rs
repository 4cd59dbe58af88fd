//! Reference estimators and bounds: orthogonal matching pursuit, exhaustive
//! deterministic maximum likelihood over grid subsets, and the
//! single-snapshot Cramér-Rao bound.

use std::fmt;
use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{derivative_manifold, grid_manifold, manifold, ArrayConfig, Scene};
use crate::error::{DoaError, Result};
use crate::linalg::{dot_conj, invert_real, least_squares, norm2};
use crate::num::Real;
use crate::solver::DoaEstimate;

/// Step of the grid the baselines search by default, degrees.
pub const BASELINE_GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sapd,
    Omp,
    Dml,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sapd => "sapd",
            Method::Omp => "omp",
            Method::Dml => "dml",
        })
    }
}

/// A baseline's output in the estimate schema, tagged with its method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BaselineResult<T> {
    pub method: Method,
    #[serde(flatten)]
    pub estimate: DoaEstimate<T>,
}

impl<T: Real> BaselineResult<T> {
    pub fn angles(&self) -> &[T] {
        &self.estimate.angles
    }

    pub fn residual(&self) -> T {
        self.estimate.residual
    }
}

fn finish<T: Real>(
    method: Method,
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    angles: Vec<T>,
    iterations: usize,
    start: Instant,
) -> Result<BaselineResult<T>> {
    let mut est = if angles.is_empty() {
        let mut e = DoaEstimate::empty();
        e.residual = norm2(y);
        e
    } else {
        let fit = least_squares(&manifold(cfg, &angles), y)?;
        DoaEstimate::from_fit(angles, fit.solution, fit.residual_norm, 0, true)
    };
    est.iterations = iterations;
    est.elapsed = start.elapsed();
    Ok(BaselineResult { method, estimate: est })
}

fn check_snapshot<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>]) -> Result<()> {
    if y.len() != cfg.num_elements {
        return Err(DoaError::SnapshotLength {
            expected: cfg.num_elements,
            got: y.len(),
        });
    }
    Ok(())
}

/// Orthogonal matching pursuit over the grid of `cfg`. Stops after `k_max`
/// atoms or once the residual norm drops to `residual_stop`.
pub fn omp<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], k_max: usize, residual_stop: T) -> Result<BaselineResult<T>> {
    let start = Instant::now();
    check_snapshot(cfg, y)?;
    if k_max >= cfg.num_elements {
        return Err(DoaError::Cardinality {
            cardinality: k_max,
            elements: cfg.num_elements,
        });
    }
    let grid = cfg.grid();
    let dict = grid_manifold(cfg);
    let norms: Vec<T> = (0..grid.len).map(|g| norm2(dict.column(g))).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut r = y.to_vec();
    let mut iterations = 0;
    while active.len() < k_max && norm2(&r) > residual_stop {
        let pick = (0..grid.len)
            .filter(|g| !active.contains(g))
            .map(|g| (g, dot_conj(dict.column(g), &r).norm() / norms[g]))
            .fold(None, |best: Option<(usize, T)>, (g, c)| match best {
                Some((_, b)) if b >= c => best,
                _ => Some((g, c)),
            });
        let Some((g, _)) = pick else { break };
        active.push(g);
        let thetas: Vec<T> = active.iter().map(|&i| grid.angle(i)).collect();
        match least_squares(&manifold(cfg, &thetas), y) {
            Ok(fit) => r = fit.residual,
            Err(_) => {
                active.pop();
                break;
            }
        }
        iterations += 1;
    }
    let angles = active.iter().map(|&g| grid.angle(g)).collect();
    finish(Method::Omp, cfg, y, angles, iterations, start)
}

/// Largest source count [`dml_exhaustive`] accepts.
pub const DML_MAX_SOURCES: usize = 2;

/// Exhaustive deterministic maximum likelihood: the `k`-subset of the grid
/// with the smallest least-squares residual. Ties go to the
/// lexicographically smallest subset.
pub fn dml_exhaustive<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], k: usize) -> Result<BaselineResult<T>> {
    let start = Instant::now();
    check_snapshot(cfg, y)?;
    if k > DML_MAX_SOURCES {
        return Err(DoaError::Capacity {
            requested: k,
            max: DML_MAX_SOURCES,
        });
    }
    let grid = cfg.grid();
    if k == 0 {
        return finish(Method::Dml, cfg, y, Vec::new(), 0, start);
    }
    let dict = grid_manifold(cfg);
    let z: Vec<Complex<T>> = (0..grid.len).map(|g| dot_conj(dict.column(g), y)).collect();
    let gram: Vec<T> = (0..grid.len).map(|g| dict.column(g).iter().map(|v| v.norm_sqr()).sum()).collect();

    // captured energy ‖P_A y‖², maximised
    let best = if k == 1 {
        (0..grid.len)
            .map(|g| (z[g].norm_sqr() / gram[g], vec![g]))
            .fold(None, pick_max)
    } else {
        let per_row: Vec<Option<(T, Vec<usize>)>> = (0..grid.len)
            .into_par_iter()
            .map(|i| {
                (i + 1..grid.len)
                    .filter_map(|j| {
                        let c = dot_conj(dict.column(i), dict.column(j));
                        let det = gram[i] * gram[j] - c.norm_sqr();
                        if !(det > T::epsilon().sqrt() * gram[i] * gram[j]) {
                            return None;
                        }
                        // zᴴ G⁻¹ z for the 2×2 Gram matrix
                        let cross = (z[i].conj() * c * z[j]).re;
                        let e = (gram[j] * z[i].norm_sqr() + gram[i] * z[j].norm_sqr() - T::of(2.0) * cross) / det;
                        Some((e, vec![i, j]))
                    })
                    .fold(None, pick_max)
            })
            .collect();
        per_row.into_iter().flatten().fold(None, pick_max)
    };
    let support = best.map(|b| b.1).unwrap_or_default();
    let angles = support.iter().map(|&g| grid.angle(g)).collect();
    finish(Method::Dml, cfg, y, angles, 1, start)
}

/// Sequential order keeps ties on the earliest (lexicographically smallest)
/// support.
fn pick_max<T: Real>(best: Option<(T, Vec<usize>)>, next: (T, Vec<usize>)) -> Option<(T, Vec<usize>)> {
    match best {
        Some(b) if b.0 >= next.0 => Some(b),
        _ => Some(next),
    }
}

/// Deterministic single-snapshot Cramér-Rao bound on each angle's standard
/// deviation, degrees. Returns infinity for every angle when the Fisher
/// information is singular.
pub fn crlb<T: Real>(cfg: &ArrayConfig<T>, scene: &Scene<T>, sigma2: T) -> Vec<T> {
    let k = scene.num_sources();
    let inf = vec![T::infinity(); k];
    if k == 0 || k >= cfg.num_elements {
        return inf;
    }
    let a = manifold(cfg, &scene.angles);
    let d = derivative_manifold(cfg, &scene.angles);
    let mut projected = Vec::with_capacity(k);
    for i in 0..k {
        match least_squares(&a, d.column(i)) {
            Ok(fit) => projected.push(fit.residual),
            Err(_) => return inf,
        }
    }
    let x = &scene.amplitudes;
    let mut info = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            let h = dot_conj(&projected[i], &projected[j]);
            info[i * k + j] = (h * x[j] * x[i].conj()).re;
        }
    }
    match invert_real(&info, k) {
        Some(inv) => (0..k)
            .map(|i| {
                let v = sigma2 / T::of(2.0) * inv[i * k + i];
                if v >= T::zero() {
                    v.sqrt()
                } else {
                    T::infinity()
                }
            })
            .collect(),
        None => inf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, synthesize_snapshot};
    use crate::spectrum::bartlett_spectrum;

    fn fine() -> ArrayConfig<f64> {
        ArrayConfig::default().with_grid_step(BASELINE_GRID_STEP)
    }

    #[test]
    fn omp_single_source_one_iteration() {
        let c = fine();
        let y = steering_vector(&c, 12.5);
        let r = omp(&c, &y, 3, 1e-9).unwrap();
        assert_eq!(r.angles(), &[12.5]);
        assert_eq!(r.estimate.iterations, 1);
    }

    #[test]
    fn omp_orthogonal_atoms() {
        // sin θ = 0 and sin θ = 0.25 give orthogonal steering vectors for M = 8
        let c = ArrayConfig::new(8, -90.0, 90.0, 0.5).unwrap();
        let t2 = 0.25f64.asin().to_degrees();
        let c = ArrayConfig { grid_min: -t2 * 2.0, grid_max: t2 * 2.0, grid_step: t2, ..c };
        let y: Vec<_> = steering_vector(&c, 0.0)
            .iter()
            .zip(steering_vector(&c, t2))
            .map(|(a, b)| a * 2.0 + b * Complex::new(0.0, 1.0))
            .collect();
        let r = omp(&c, &y, 3, 1e-9).unwrap();
        assert_eq!(r.estimate.iterations, 2);
        assert!((r.angles()[0]).abs() < 1e-12 && (r.angles()[1] - t2).abs() < 1e-12);
    }

    #[test]
    fn omp_rejects_full_support() {
        let c = fine();
        let y = steering_vector(&c, 0.0);
        assert!(omp(&c, &y, 8, 0.0).is_err());
    }

    #[test]
    fn dml_single_equals_spectrum_argmax() {
        let c = fine();
        for seed in 0..20 {
            let scene = Scene::with_real_amplitudes(vec![-7.3, 11.0], &[30.0, 20.0], 5.0);
            let y = synthesize_snapshot(&c, &scene, seed).unwrap().data;
            let s = bartlett_spectrum(&c, &y).unwrap();
            let r = dml_exhaustive(&c, &y, 1).unwrap();
            assert_eq!(r.angles(), &[c.grid().angle(s.argmax())]);
        }
    }

    #[test]
    fn dml_noiseless_pair_exact() {
        let c = fine();
        let scene = Scene::with_real_amplitudes(vec![0.0, 8.0], &[30.0, 30.0], f64::INFINITY);
        let y = synthesize_snapshot(&c, &scene, 0).unwrap().data;
        let r = dml_exhaustive(&c, &y, 2).unwrap();
        assert_eq!(r.angles(), &[0.0, 8.0]);
        assert!(r.residual() < 1e-9);
    }

    #[test]
    fn dml_matches_brute_force_least_squares() {
        let c = ArrayConfig::new(8, -10.0, 10.0, 1.0).unwrap();
        let scene = Scene::with_real_amplitudes(vec![-2.0, 3.0], &[30.0, 30.0], 0.0);
        let y = synthesize_snapshot(&c, &scene, 3).unwrap().data;
        let grid = c.grid();
        let mut best = (f64::INFINITY, vec![]);
        for i in 0..grid.len {
            for j in i + 1..grid.len {
                let res = least_squares(&manifold(&c, &[grid.angle(i), grid.angle(j)]), &y)
                    .unwrap()
                    .residual_norm;
                if res < best.0 {
                    best = (res, vec![grid.angle(i), grid.angle(j)]);
                }
            }
        }
        let r = dml_exhaustive(&c, &y, 2).unwrap();
        assert_eq!(r.angles(), best.1.as_slice());
        assert!((r.residual() - best.0).abs() < 1e-9);
    }

    #[test]
    fn dml_rejects_three_sources() {
        let c = fine();
        let y = steering_vector(&c, 0.0);
        assert!(matches!(dml_exhaustive(&c, &y, 3), Err(DoaError::Capacity { .. })));
    }

    #[test]
    fn crlb_single_source_closed_form() {
        let c = ArrayConfig::<f64>::default();
        let m = c.num_elements as f64;
        for &theta in &[0.0f64, 20.0, -45.0] {
            let s = Complex::new(3.0, -4.0);
            let scene = Scene::noiseless(vec![theta], vec![s]);
            let sigma2 = 0.7;
            // ‖P⊥b‖² = (π cosθ · π/180)² · M(M²−1)/12
            let slope = std::f64::consts::PI * theta.to_radians().cos() * std::f64::consts::PI / 180.0;
            let energy = slope * slope * m * (m * m - 1.0) / 12.0;
            let expected = (sigma2 / (2.0 * s.norm_sqr() * energy)).sqrt();
            let got = crlb(&c, &scene, sigma2)[0];
            assert!((got - expected).abs() / expected < 1e-9, "{got} {expected}");
        }
    }

    #[test]
    fn crlb_scales_with_noise() {
        let c = ArrayConfig::<f64>::default();
        let scene = Scene::with_real_amplitudes(vec![0.0, 8.0], &[30.0, 30.0], 15.0);
        let lo = crlb(&c, &scene, 1.0);
        let hi = crlb(&c, &scene, 10.0);
        for (l, h) in lo.iter().zip(&hi) {
            assert!((h / l - 10f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn crlb_phase_invariant() {
        let c = ArrayConfig::<f64>::default();
        let scene = Scene::new(vec![0.0, 8.0], vec![Complex::new(30.0, 1.0), Complex::new(-5.0, 29.0)], 15.0);
        let rot = Complex::from_polar(1.0, 1.234);
        let rotated = Scene::new(scene.angles.clone(), scene.amplitudes.iter().map(|a| a * rot).collect(), 15.0);
        for (a, b) in crlb(&c, &scene, 2.0).iter().zip(crlb(&c, &rotated, 2.0)) {
            assert!((a - b).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn crlb_coincident_angles_infinite() {
        let c = ArrayConfig::<f64>::default();
        let scene = Scene::with_real_amplitudes(vec![5.0, 5.0], &[1.0, 1.0], 15.0);
        assert!(crlb(&c, &scene, 1.0).iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn json_carries_method_tag() {
        let c = fine();
        let y = steering_vector(&c, 3.0);
        let r = omp(&c, &y, 1, 0.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["method"], "omp");
        assert_eq!(v["angles_deg"][0], 3.0);
        let back: BaselineResult<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back.method, Method::Omp);
        assert_eq!(back.angles(), r.angles());
    }
}
