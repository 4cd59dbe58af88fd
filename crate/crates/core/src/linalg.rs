//! Small dense complex linear algebra for the support-sized systems the
//! solver works with (at most `M` rows and `M - 1` columns).
//!
//! Least squares goes through a Householder QR of the design matrix. The
//! normal equations are never formed, which keeps closely spaced support
//! angles usable down to the degeneracy limit.

use num_complex::Complex;

use crate::error::{DoaError, Result};
use crate::num::Real;

/// Column-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns<I>(rows: usize, columns: I) -> Self
    where
        I: IntoIterator<Item = Vec<Complex<T>>>,
    {
        let mut data = Vec::new();
        let mut cols = 0;
        for c in columns {
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend(c);
            cols += 1;
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex<T>) {
        self.data[col * self.rows + row] = value;
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[Complex<T>] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, col: usize) -> &mut [Complex<T>] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.column(j)) {
                *o = *o + a * xj;
            }
        }
        out
    }

    /// `Aᴴ x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols).map(|j| dot_conj(self.column(j), x)).collect()
    }
}

/// `aᴴ b`.
#[inline]
pub fn dot_conj<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        })
}

#[inline]
pub fn norm2<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Solution of `min ‖b − A x‖₂`.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub solution: Vec<Complex<T>>,
    /// `b − A x`, recomputed from the solution.
    pub residual: Vec<Complex<T>>,
    pub residual_norm: T,
    /// Frobenius-norm condition estimate of `AᴴA`, i.e. `(‖R‖_F ‖R⁻¹‖_F)²`.
    /// Never smaller than the 2-norm condition number.
    pub condition: T,
}

/// Least squares through Householder QR. Fails with
/// [`DoaError::DegenerateSupport`] when `AᴴA` is numerically singular.
pub fn least_squares<T: Real>(a: &CMatrix<T>, b: &[Complex<T>]) -> Result<LeastSquares<T>> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(b.len(), m, "right-hand side length mismatch");
    assert!(n >= 1 && n <= m, "least squares needs 1 <= cols <= rows");
    let zero = Complex::new(T::zero(), T::zero());
    let limit = T::degenerate_condition();

    let mut r = a.data.clone();
    let mut qb = b.to_vec();
    let mut v = vec![zero; m];

    for k in 0..n {
        let col = &r[k * m..(k + 1) * m];
        let norm = col[k..].iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(degenerate(T::infinity(), limit));
        }
        let x0 = col[k];
        let phase = if x0.norm() == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        v[k] = x0 - alpha;
        v[k + 1..m].copy_from_slice(&col[k + 1..m]);
        let vv = v[k..].iter().map(|z| z.norm_sqr()).sum::<T>();
        let two = T::of(2.0);

        for j in k + 1..n {
            let cj = &mut r[j * m..(j + 1) * m];
            let s = dot_conj(&v[k..], &cj[k..]) * (two / vv);
            for (c, &vi) in cj[k..].iter_mut().zip(&v[k..]) {
                *c = *c - vi * s;
            }
        }
        let s = dot_conj(&v[k..], &qb[k..]) * (two / vv);
        for (c, &vi) in qb[k..].iter_mut().zip(&v[k..]) {
            *c = *c - vi * s;
        }
        r[k * m + k] = alpha;
    }

    let rij = |i: usize, j: usize| r[j * m + i];

    // ‖R⁻¹‖_F by back substitution against the identity.
    let mut inv_fro = T::zero();
    let mut col = vec![zero; n];
    for e in 0..n {
        for i in (0..=e).rev() {
            let mut acc = if i == e {
                Complex::new(T::one(), T::zero())
            } else {
                zero
            };
            for j in i + 1..=e {
                acc = acc - rij(i, j) * col[j];
            }
            col[i] = acc / rij(i, i);
            inv_fro = inv_fro + col[i].norm_sqr();
        }
    }
    let r_fro = (0..n)
        .flat_map(|j| (0..=j).map(move |i| (i, j)))
        .map(|(i, j)| rij(i, j).norm_sqr())
        .sum::<T>();
    let condition = r_fro * inv_fro;
    if !condition.is_finite() || condition > limit {
        return Err(degenerate(condition, limit));
    }

    let mut x = vec![zero; n];
    for i in (0..n).rev() {
        let mut acc = qb[i];
        for j in i + 1..n {
            acc = acc - rij(i, j) * x[j];
        }
        x[i] = acc / rij(i, i);
    }

    let fitted = a.mul_vec(&x);
    let residual: Vec<_> = b.iter().zip(&fitted).map(|(&bi, &fi)| bi - fi).collect();
    let residual_norm = norm2(&residual);
    Ok(LeastSquares {
        solution: x,
        residual,
        residual_norm,
        condition,
    })
}

/// Real-constrained least squares `min_β ‖b − A β‖₂` with `β ∈ ℝⁿ` and
/// complex `A`, `b`. Solved as the stacked real system `[Re A; Im A] β =
/// [Re b; Im b]`, whose normal equations are `Re(AᴴA) β = Re(Aᴴb)`.
pub fn real_least_squares<T: Real>(a: &CMatrix<T>, b: &[Complex<T>]) -> Result<Vec<T>> {
    let (m, n) = (a.rows, a.cols);
    let zero = T::zero();
    let mut stacked = CMatrix::zeros(2 * m, n);
    for j in 0..n {
        let src = a.column(j);
        let dst = stacked.column_mut(j);
        for i in 0..m {
            dst[i] = Complex::new(src[i].re, zero);
            dst[m + i] = Complex::new(src[i].im, zero);
        }
    }
    let rhs: Vec<_> = b
        .iter()
        .map(|z| Complex::new(z.re, zero))
        .chain(b.iter().map(|z| Complex::new(z.im, zero)))
        .collect();
    let ls = least_squares(&stacked, &rhs)?;
    Ok(ls.solution.into_iter().map(|z| z.re).collect())
}

/// Inverse of a small dense real matrix (row-major) by Gauss-Jordan with
/// partial pivoting. Returns `None` when a pivot vanishes relative to the
/// matrix scale.
pub fn invert_real<T: Real>(mat: &[T], n: usize) -> Option<Vec<T>> {
    assert_eq!(mat.len(), n * n);
    let scale = mat.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::of(n as f64);
    let mut a = mat.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| {
            a[x * n + c]
                .abs()
                .partial_cmp(&a[y * n + c].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[p * n + c].abs() <= tiny {
            return None;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
                inv.swap(p * n + k, c * n + k);
            }
        }
        let piv = a[c * n + c];
        for k in 0..n {
            a[c * n + k] = a[c * n + k] / piv;
            inv[c * n + k] = inv[c * n + k] / piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r * n + c];
                if f != T::zero() {
                    for k in 0..n {
                        a[r * n + k] = a[r * n + k] - f * a[c * n + k];
                        inv[r * n + k] = inv[r * n + k] - f * inv[c * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn degenerate<T: Real>(condition: T, limit: T) -> DoaError {
    DoaError::DegenerateSupport {
        condition: condition.as_f64(),
        limit: limit.as_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn exact_system_recovers_solution() {
        let a = CMatrix::from_columns(
            3,
            vec![
                vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)],
                vec![c(0.5, 0.5), c(1.0, 0.0), c(-1.0, 0.0)],
            ],
        );
        let x_true = [c(2.0, 3.0), c(-1.0, 0.5)];
        let b = a.mul_vec(&x_true);
        let ls = least_squares(&a, &b).unwrap();
        for (x, t) in ls.solution.iter().zip(&x_true) {
            assert!((x - t).norm() < 1e-12);
        }
        assert!(ls.residual_norm < 1e-12);
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let a = CMatrix::from_columns(
            4,
            vec![
                vec![c(1.0, 0.0), c(1.0, 1.0), c(0.0, 2.0), c(3.0, 0.0)],
                vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, -1.0), c(0.0, 0.0)],
            ],
        );
        let b = vec![c(1.0, 2.0), c(-1.0, 0.0), c(0.5, 0.5), c(2.0, -3.0)];
        let ls = least_squares(&a, &b).unwrap();
        for z in a.adjoint_mul_vec(&ls.residual) {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn duplicate_columns_are_degenerate() {
        let col = vec![c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)];
        let a = CMatrix::from_columns(3, vec![col.clone(), col]);
        let err = least_squares(&a, &[c(1.0, 0.0); 3]).unwrap_err();
        assert!(matches!(err, DoaError::DegenerateSupport { .. }));
    }

    #[test]
    fn real_constraint_matches_normal_equations() {
        let a = CMatrix::from_columns(
            3,
            vec![
                vec![c(1.0, 2.0), c(0.0, 1.0), c(-1.0, 0.5)],
                vec![c(0.0, -1.0), c(2.0, 0.0), c(1.0, 1.0)],
            ],
        );
        let b = vec![c(0.3, -0.7), c(1.1, 0.2), c(-0.4, 0.9)];
        let beta = real_least_squares(&a, &b).unwrap();
        // Re(AᴴA) β = Re(Aᴴb)
        let g = |i: usize, j: usize| dot_conj(a.column(i), a.column(j)).re;
        let rhs = a.adjoint_mul_vec(&b);
        for i in 0..2 {
            let lhs = g(i, 0) * beta[0] + g(i, 1) * beta[1];
            assert!((lhs - rhs[i].re).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_jordan_inverse() {
        let m = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let inv = invert_real(&m, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i * 3 + k] * inv[k * 3 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
        assert!(invert_real(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
