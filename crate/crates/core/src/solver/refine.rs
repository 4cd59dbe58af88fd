//! Off-grid refinement inside the regions of interest left by the search.

use num_complex::Complex;

use super::estimate::DoaEstimate;
use super::ls::{amplitudes_and_beta, ls_fit};
use super::params::SolverParams;
use super::search::RoiSet;
use crate::array::ArrayConfig;
use crate::error::Result;
use crate::num::Real;

/// Default bisection tolerance: an eighth of the grid step.
pub fn default_bisection_tol<T: Real>(cfg: &ArrayConfig<T>) -> T {
    cfg.grid_step / T::of(8.0)
}

/// Halves every ROI wider than the tolerance on the side indicated by the
/// jointly evaluated pseudo-derivative at the interval midpoints, then adds
/// the final midpoint's `β` as the off-grid correction when that lowers the
/// residual.
///
/// A degenerate fit during the halving stops early and reports the ROI
/// midpoints with `converged = false`.
pub fn bisection_refine<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    rois: &RoiSet<T>,
    params: &SolverParams<T>,
) -> Result<DoaEstimate<T>> {
    let grid = cfg.grid();
    let tol = params.bisection_tol.unwrap_or_else(|| default_bisection_tol(cfg));
    let mut bounds: Vec<(T, T)> = rois.intervals.clone();
    let mid = |b: &[(T, T)]| -> Vec<T> { b.iter().map(|&(lo, hi)| (lo + hi) / T::of(2.0)).collect() };
    let mut steps = 0;

    let fallback = |b: &[(T, T)], steps: usize| -> Result<DoaEstimate<T>> {
        let mut thetas = mid(b);
        thetas.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        thetas.dedup_by(|a, b| (*a - *b).abs() < tol);
        let fit = ls_fit(cfg, y, &thetas)?;
        Ok(DoaEstimate::from_fit(thetas, fit.solution, fit.residual_norm, steps, false))
    };

    while bounds.iter().any(|&(lo, hi)| hi - lo > tol) {
        let thetas = mid(&bounds);
        let beta = match amplitudes_and_beta(cfg, y, &thetas) {
            Ok((_, beta)) => beta,
            Err(_) => return fallback(&bounds, steps),
        };
        for ((lo, hi), (&m, &b)) in bounds.iter_mut().zip(thetas.iter().zip(&beta)) {
            if *hi - *lo <= tol {
                continue;
            }
            if b > T::zero() {
                *lo = m;
            } else if b < T::zero() {
                *hi = m;
            } else {
                *lo = m;
                *hi = m;
            }
        }
        steps += 1;
    }

    let mut thetas = mid(&bounds);
    let mut fit = match ls_fit(cfg, y, &thetas) {
        Ok(fit) => fit,
        Err(_) => return fallback(&bounds, steps),
    };
    // the β correction, plus optional polish rounds, each kept only if it
    // lowers the residual
    for _ in 0..=params.polish_iters {
        let Ok((_, beta)) = amplitudes_and_beta(cfg, y, &thetas) else {
            break;
        };
        let next: Vec<T> = thetas.iter().zip(&beta).map(|(&t, &b)| grid.clamp_angle(t + b)).collect();
        if has_near_duplicates(&next, tol / T::of(64.0)) {
            break;
        }
        match ls_fit(cfg, y, &next) {
            Ok(next_fit) if next_fit.residual_norm < fit.residual_norm => {
                thetas = next;
                fit = next_fit;
            }
            _ => break,
        }
    }
    Ok(DoaEstimate::from_fit(thetas, fit.solution, fit.residual_norm, steps, true))
}

fn has_near_duplicates<T: Real>(thetas: &[T], gap: T) -> bool {
    let mut s = thetas.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    s.windows(2).any(|w| w[1] - w[0] < gap)
}
