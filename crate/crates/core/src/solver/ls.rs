//! Least-squares amplitudes, the angular pseudo-derivative and the residual
//! for a fixed set of support angles.

use num_complex::Complex;

use crate::array::{derivative_manifold, manifold, ArrayConfig};
use crate::error::{DoaError, Result};
use crate::linalg::{least_squares, real_least_squares, CMatrix, LeastSquares};
use crate::num::{sign, Real};

fn check_support<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], thetas: &[T]) -> Result<()> {
    if y.len() != cfg.num_elements {
        return Err(DoaError::SnapshotLength {
            expected: cfg.num_elements,
            got: y.len(),
        });
    }
    if thetas.is_empty() {
        return Err(DoaError::Empty("support angles"));
    }
    if thetas.len() >= cfg.num_elements {
        return Err(DoaError::Cardinality {
            cardinality: thetas.len(),
            elements: cfg.num_elements,
        });
    }
    Ok(())
}

/// Least-squares fit of `y` on the steering vectors at `thetas`.
pub fn ls_fit<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], thetas: &[T]) -> Result<LeastSquares<T>> {
    check_support(cfg, y, thetas)?;
    least_squares(&manifold(cfg, thetas), y)
}

/// `x = argmin ‖y − A(θ)x‖₂`.
pub fn ls_amplitudes<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], thetas: &[T]) -> Result<Vec<Complex<T>>> {
    Ok(ls_fit(cfg, y, thetas)?.solution)
}

/// `ε = ‖y − A(θ)x(θ)‖₂` with `x` the least-squares amplitudes.
pub fn residual<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], thetas: &[T]) -> Result<T> {
    Ok(ls_fit(cfg, y, thetas)?.residual_norm)
}

/// Real angular corrections `β` (degrees) from the first-order model
/// `y ≈ A x + B diag(x) β`, where `B` holds the steering derivatives.
/// Positive entries point toward larger angles.
///
/// The amplitudes are refitted jointly with `β`, so the derivative columns
/// enter only through their part orthogonal to the steering columns.
pub fn pseudo_derivative<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    thetas: &[T],
    x: &[Complex<T>],
) -> Result<Vec<T>> {
    check_support(cfg, y, thetas)?;
    assert_eq!(thetas.len(), x.len(), "one amplitude per support angle");
    if let Some(element) = x.iter().position(|z| !(z.norm() > T::zero())) {
        return Err(DoaError::WeakAmplitude { element });
    }
    let a = manifold(cfg, thetas);
    let fitted = a.mul_vec(x);
    let y_res: Vec<Complex<T>> = y.iter().zip(&fitted).map(|(&yi, &fi)| yi - fi).collect();
    pseudo_derivative_with_residual(cfg, &a, thetas, x, &y_res)
}

pub(crate) fn pseudo_derivative_with_residual<T: Real>(
    cfg: &ArrayConfig<T>,
    a: &CMatrix<T>,
    thetas: &[T],
    x: &[Complex<T>],
    y_res: &[Complex<T>],
) -> Result<Vec<T>> {
    let mut b = derivative_manifold(cfg, thetas);
    let mut projected = CMatrix::zeros(cfg.num_elements, thetas.len());
    for (k, &xk) in x.iter().enumerate() {
        for v in b.column_mut(k) {
            *v = *v * xk;
        }
        let off_span = least_squares(a, b.column(k))?.residual;
        projected.column_mut(k).copy_from_slice(&off_span);
    }
    // the orthogonal complement has 2(M − K) real dimensions, too few for K
    // real corrections once K > 2M/3; fall back to the unprojected columns
    match real_least_squares(&projected, y_res) {
        Err(DoaError::DegenerateSupport { .. }) => real_least_squares(&b, y_res),
        other => other,
    }
}

/// Amplitudes and pseudo-derivative at `thetas` in one pass.
pub fn amplitudes_and_beta<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    thetas: &[T],
) -> Result<(LeastSquares<T>, Vec<T>)> {
    check_support(cfg, y, thetas)?;
    let a = manifold(cfg, thetas);
    let fit = least_squares(&a, y)?;
    if let Some(element) = fit.solution.iter().position(|z| !(z.norm() > T::zero())) {
        return Err(DoaError::WeakAmplitude { element });
    }
    let beta = pseudo_derivative_with_residual(cfg, &a, thetas, &fit.solution, &fit.residual)?;
    Ok((fit, beta))
}

/// `h = sgn β(θ − Δθ) + sgn β(θ + Δθ)`, each shifted set clamped to the grid.
/// Zero entries mark supports that bracket a stationary point.
pub fn sign_constraint<T: Real>(cfg: &ArrayConfig<T>, y: &[Complex<T>], thetas: &[T], shift: T) -> Result<Vec<i64>> {
    let grid = cfg.grid();
    let at = |offset: T| -> Result<Vec<T>> {
        let shifted: Vec<T> = thetas.iter().map(|&t| grid.clamp_angle(t + offset)).collect();
        Ok(amplitudes_and_beta(cfg, y, &shifted)?.1)
    };
    let left = at(-shift)?;
    let right = at(shift)?;
    Ok(left.iter().zip(&right).map(|(&l, &r)| sign(l) + sign(r)).collect())
}
