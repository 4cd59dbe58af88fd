//! Uniform linear array geometry, steering vectors and synthetic
//! single-snapshot scenes.
//!
//! Every public angle is in degrees. The steering derivative is taken per
//! degree as well, so a first-order model `a(θ + β) ≈ a(θ) + b(θ)·β`
//! holds with `β` in degrees.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::CMatrix;
use crate::num::{cis, db_to_linear, Real};
use crate::serde_util;

/// ULA geometry plus the angular search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ArrayConfig<T = f64> {
    pub num_elements: usize,
    /// Inter-element spacing in wavelengths.
    pub element_spacing: T,
    pub grid_min: T,
    pub grid_max: T,
    pub grid_step: T,
}

impl<T: Real> Default for ArrayConfig<T> {
    /// Eight half-wavelength elements, grid `[-60°, 60°]` at 1°.
    fn default() -> Self {
        Self {
            num_elements: 8,
            element_spacing: T::of(0.5),
            grid_min: T::of(-60.0),
            grid_max: T::of(60.0),
            grid_step: T::one(),
        }
    }
}

impl<T: Real> ArrayConfig<T> {
    pub fn new(num_elements: usize, grid_min: T, grid_max: T, grid_step: T) -> Result<Self> {
        let cfg = Self {
            num_elements,
            element_spacing: T::of(0.5),
            grid_min,
            grid_max,
            grid_step,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same array, different grid step (baselines run on a finer grid).
    pub fn with_grid_step(mut self, grid_step: T) -> Self {
        self.grid_step = grid_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DoaError::InvalidConfig(m.to_string()));
        if self.num_elements < 2 {
            return bad("num_elements must be at least 2");
        }
        if !(self.element_spacing > T::zero()) || !self.element_spacing.is_finite() {
            return bad("element_spacing must be positive");
        }
        if !self.grid_min.is_finite() || !self.grid_max.is_finite() || self.grid_min >= self.grid_max {
            return bad("grid_min must be below grid_max");
        }
        if !(self.grid_step > T::zero()) || !self.grid_step.is_finite() {
            return bad("grid_step must be positive");
        }
        Ok(())
    }

    #[inline]
    pub fn grid(&self) -> Grid<T> {
        let span = (self.grid_max - self.grid_min) / self.grid_step;
        // tolerate representation error in the span, e.g. 120/0.1
        let len = (span + T::of(1e-9)).floor().to_usize().unwrap_or(0) + 1;
        Grid {
            min: self.grid_min,
            step: self.grid_step,
            len,
        }
    }
}

/// Uniform angular grid `θ_g = min + g·step`, `g ∈ [0, len)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub min: T,
    pub step: T,
    pub len: usize,
}

impl<T: Real> Grid<T> {
    #[inline]
    pub fn angle(&self, index: usize) -> T {
        self.min + self.step * T::of(index as f64)
    }

    #[inline]
    pub fn max(&self) -> T {
        self.angle(self.len - 1)
    }

    /// Nearest grid index, clamped into the grid.
    pub fn nearest(&self, theta: T) -> usize {
        let pos = ((theta - self.min) / self.step).round();
        if pos <= T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(usize::MAX).min(self.len - 1)
        }
    }

    pub fn angles(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len).map(|g| self.angle(g))
    }

    #[inline]
    pub fn clamp_angle(&self, theta: T) -> T {
        theta.max(self.min).min(self.max())
    }
}

#[inline]
fn spatial_phase_rate<T: Real>(cfg: &ArrayConfig<T>) -> T {
    T::of(2.0) * T::PI() * cfg.element_spacing
}

/// `a(θ)`: element `m` is `exp(−j·2π·d·m·sin θ)`; for `d = λ/2` this is
/// `exp(−jπ m sin θ)`.
pub fn steering_vector<T: Real>(cfg: &ArrayConfig<T>, theta: T) -> Vec<Complex<T>> {
    let k = spatial_phase_rate(cfg) * (theta * T::deg_to_rad()).sin();
    (0..cfg.num_elements)
        .map(|m| cis(-k * T::of(m as f64)))
        .collect()
}

/// `b(θ) = ∂a/∂θ` with `θ` in degrees.
pub fn steering_derivative<T: Real>(cfg: &ArrayConfig<T>, theta: T) -> Vec<Complex<T>> {
    let rad = theta * T::deg_to_rad();
    let k = spatial_phase_rate(cfg);
    let phase_rate = k * rad.sin();
    let slope = k * rad.cos() * T::deg_to_rad();
    (0..cfg.num_elements)
        .map(|m| {
            let mf = T::of(m as f64);
            // d/dθ exp(−j k m sinθ) = −j k m cosθ · exp(...)
            Complex::new(T::zero(), -slope * mf) * cis(-phase_rate * mf)
        })
        .collect()
}

/// `A(θ) = [a(θ₁), …, a(θ_K)]`.
pub fn manifold<T: Real>(cfg: &ArrayConfig<T>, thetas: &[T]) -> CMatrix<T> {
    CMatrix::from_columns(
        cfg.num_elements,
        thetas.iter().map(|&t| steering_vector(cfg, t)),
    )
}

/// `B(θ) = [b(θ₁), …, b(θ_K)]`.
pub fn derivative_manifold<T: Real>(cfg: &ArrayConfig<T>, thetas: &[T]) -> CMatrix<T> {
    CMatrix::from_columns(
        cfg.num_elements,
        thetas.iter().map(|&t| steering_derivative(cfg, t)),
    )
}

/// Steering matrix over the whole search grid.
pub fn grid_manifold<T: Real>(cfg: &ArrayConfig<T>) -> CMatrix<T> {
    let grid = cfg.grid();
    let thetas: Vec<T> = grid.angles().collect();
    manifold(cfg, &thetas)
}

/// How a scene's `snr_db` maps to the per-element noise variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// `snr = |s̄|² / σ²` measured at a single element.
    #[default]
    PerElement,
    /// `snr = ‖Σ a(θ_k)s_k‖² / (M·σ²)`: mean per-element power of the
    /// noise-free array signal, so coherent sources count with their
    /// interference.
    Measured,
}

/// Far-field point sources for one range-Doppler cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Scene<T = f64> {
    pub angles: Vec<T>,
    #[serde(with = "serde_util::complex_vec")]
    pub amplitudes: Vec<Complex<T>>,
    /// `null` in JSON means noiseless.
    #[serde(with = "serde_util::db_or_inf")]
    pub snr_db: T,
    #[serde(default)]
    pub snr_convention: SnrConvention,
}

impl<T: Real> Scene<T> {
    pub fn new(angles: Vec<T>, amplitudes: Vec<Complex<T>>, snr_db: T) -> Self {
        Self {
            angles,
            amplitudes,
            snr_db,
            snr_convention: SnrConvention::default(),
        }
    }

    /// Real amplitudes, one per angle.
    pub fn with_real_amplitudes(angles: Vec<T>, amplitudes: &[T], snr_db: T) -> Self {
        let amps = amplitudes.iter().map(|&a| Complex::new(a, T::zero())).collect();
        Self::new(angles, amps, snr_db)
    }

    pub fn noiseless(angles: Vec<T>, amplitudes: Vec<Complex<T>>) -> Self {
        Self::new(angles, amplitudes, T::infinity())
    }

    pub fn with_convention(mut self, convention: SnrConvention) -> Self {
        self.snr_convention = convention;
        self
    }

    #[inline]
    pub fn num_sources(&self) -> usize {
        self.angles.len()
    }

    /// Mean of `|s_k|²`.
    pub fn mean_source_power(&self) -> T {
        if self.amplitudes.is_empty() {
            return T::zero();
        }
        self.amplitudes.iter().map(|s| s.norm_sqr()).sum::<T>() / T::of(self.amplitudes.len() as f64)
    }

    /// Per-element noise variance implied by `snr_db` and the convention.
    pub fn noise_variance(&self, cfg: &ArrayConfig<T>) -> T {
        if self.snr_db == T::infinity() {
            return T::zero();
        }
        let signal = match self.snr_convention {
            SnrConvention::PerElement => self.mean_source_power(),
            SnrConvention::Measured => {
                crate::linalg::norm2(&noiseless_signal(cfg, self)).powi(2) / T::of(cfg.num_elements as f64)
            }
        };
        signal / db_to_linear(self.snr_db)
    }

    pub fn validate(&self, cfg: &ArrayConfig<T>) -> Result<()> {
        let bad = |m: String| Err(DoaError::InvalidScene(m));
        if self.angles.len() != self.amplitudes.len() {
            return bad(format!(
                "{} angles but {} amplitudes",
                self.angles.len(),
                self.amplitudes.len()
            ));
        }
        if self.angles.len() >= cfg.num_elements {
            return bad(format!(
                "{} sources not identifiable with {} elements",
                self.angles.len(),
                cfg.num_elements
            ));
        }
        for &a in &self.angles {
            if !(a > cfg.grid_min && a < cfg.grid_max) {
                return bad(format!("angle {a} outside ({}, {})", cfg.grid_min, cfg.grid_max));
            }
        }
        let mut sorted = self.angles.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("angles must be pairwise distinct".into());
        }
        if self.snr_db.is_nan() || self.snr_db == T::neg_infinity() {
            return bad("snr_db must be a number or +inf".into());
        }
        Ok(())
    }
}

/// One complex observation across all elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Snapshot<T = f64> {
    #[serde(with = "serde_util::complex_vec")]
    pub data: Vec<Complex<T>>,
    /// Known to the harness only; estimators never read it.
    pub noise_variance: T,
}

/// `y = Σ a(θ_k)·s_k + n` with the noise variance taken from the scene's SNR.
pub fn synthesize_snapshot<T: Real>(cfg: &ArrayConfig<T>, scene: &Scene<T>, seed: u64) -> Result<Snapshot<T>> {
    cfg.validate()?;
    scene.validate(cfg)?;
    let sigma2 = scene.noise_variance(cfg);
    Ok(synthesize_with_noise(cfg, scene, sigma2, seed))
}

/// `Σ a(θ_k)·s_k`.
pub fn noiseless_signal<T: Real>(cfg: &ArrayConfig<T>, scene: &Scene<T>) -> Vec<Complex<T>> {
    let mut data = vec![Complex::new(T::zero(), T::zero()); cfg.num_elements];
    for (&theta, &s) in scene.angles.iter().zip(&scene.amplitudes) {
        for (y, a) in data.iter_mut().zip(steering_vector(cfg, theta)) {
            *y = *y + a * s;
        }
    }
    data
}

/// Like [`synthesize_snapshot`] with an explicit per-element noise variance.
/// Noise is circularly-symmetric complex Gaussian, drawn from a ChaCha8
/// stream seeded with `seed`.
pub fn synthesize_with_noise<T: Real>(cfg: &ArrayConfig<T>, scene: &Scene<T>, noise_variance: T, seed: u64) -> Snapshot<T> {
    let mut data = noiseless_signal(cfg, scene);
    if noise_variance > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = (noise_variance / T::of(2.0)).sqrt();
        for y in data.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *y = *y + Complex::new(T::of(re), T::of(im)) * scale;
        }
    }
    Snapshot { data, noise_variance }
}
