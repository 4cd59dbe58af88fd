//! Single-snapshot Bartlett spectrum, noise floor, peak and beam analysis,
//! and the spectrum-driven support initialization.

use std::fmt::Write as _;

use num_complex::Complex;

use crate::array::{grid_manifold, steering_vector, ArrayConfig, Grid};
use crate::error::{DoaError, Result};
use crate::linalg::dot_conj;
use crate::num::{db_to_linear, linear_to_db, Real};

/// Tunables for the spectrum stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams<T> {
    /// Grid points more than this far below the spectrum maximum (dB) form
    /// the noise-floor population.
    pub eta_db: T,
    /// Peak detection threshold above the noise floor (dB).
    pub threshold_offset_db: T,
}

impl<T: Real> Default for SpectrumParams<T> {
    fn default() -> Self {
        Self {
            eta_db: T::of(20.0),
            threshold_offset_db: T::of(10.0),
        }
    }
}

/// Linear power per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum<T> {
    pub power: Vec<T>,
    pub config: ArrayConfig<T>,
}

impl<T: Real> SpatialSpectrum<T> {
    #[inline]
    pub fn grid(&self) -> Grid<T> {
        self.config.grid()
    }

    pub fn max_power(&self) -> T {
        self.power.iter().fold(T::zero(), |m, &p| m.max(p))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (g, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = g;
            }
        }
        best
    }

    /// `angle_deg,power_linear,power_db` with a header row.
    pub fn to_csv(&self) -> String {
        let grid = self.grid();
        let mut out = String::from("angle_deg,power_linear,power_db\n");
        for (g, &p) in self.power.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", grid.angle(g), p, linear_to_db(p));
        }
        out
    }
}

/// `P(θ_g) = |a(θ_g)ᴴ y|²` over the configured grid.
pub fn bartlett_spectrum<T: Real>(cfg: &ArrayConfig<T>, snapshot: &[Complex<T>]) -> Result<SpatialSpectrum<T>> {
    if snapshot.len() != cfg.num_elements {
        return Err(DoaError::SnapshotLength {
            expected: cfg.num_elements,
            got: snapshot.len(),
        });
    }
    let a = grid_manifold(cfg);
    let power = (0..a.cols())
        .map(|g| dot_conj(a.column(g), snapshot).norm_sqr())
        .collect();
    Ok(SpatialSpectrum { power, config: *cfg })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloor<T> {
    pub value: T,
    /// No grid point fell below the gate; `value` is the spectrum minimum.
    pub degenerate: bool,
}

/// Mean power of the grid points lying more than `eta_db` below the maximum.
pub fn estimate_noise_floor<T: Real>(spectrum: &SpatialSpectrum<T>, eta_db: T) -> NoiseFloor<T> {
    let gate = spectrum.max_power() / db_to_linear(eta_db);
    let (sum, count) = spectrum
        .power
        .iter()
        .filter(|&&p| p < gate)
        .fold((T::zero(), 0usize), |(s, n), &p| (s + p, n + 1));
    if count == 0 {
        let min = spectrum.power.iter().fold(T::infinity(), |m, &p| m.min(p));
        NoiseFloor {
            value: min,
            degenerate: true,
        }
    } else {
        NoiseFloor {
            value: sum / T::of(count as f64),
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub index: usize,
    pub power: T,
}

/// Local maxima above `n_f + threshold_offset_db`, sorted by angle.
pub fn detect_peaks<T: Real>(spectrum: &SpatialSpectrum<T>, noise_floor: T, threshold_offset_db: T) -> Vec<Peak<T>> {
    detect_peaks_above(spectrum, noise_floor * db_to_linear(threshold_offset_db))
}

/// Local maxima with power strictly above `threshold`. A flat-topped
/// maximum is reported once, at its leftmost index. Grid edges count as
/// maxima when they exceed their single neighbour.
pub fn detect_peaks_above<T: Real>(spectrum: &SpatialSpectrum<T>, threshold: T) -> Vec<Peak<T>> {
    let p = &spectrum.power;
    let n = p.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && p[j + 1] == p[i] {
            j += 1;
        }
        let left_lower = i == 0 || p[i - 1] < p[i];
        let right_lower = j + 1 == n || p[j + 1] < p[i];
        // a spectrum that is flat everywhere has no peak
        if left_lower && right_lower && !(i == 0 && j + 1 == n) && p[i] > threshold {
            peaks.push(Peak { index: i, power: p[i] });
        }
        i = j + 1;
    }
    peaks
}

/// Geometry of one spectral beam around a detected peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamFeature<T> {
    pub peak_index: usize,
    pub peak_angle: T,
    pub peak_power: T,
    pub left_half_index: usize,
    pub right_half_index: usize,
    pub left_half_angle: T,
    pub right_half_angle: T,
    /// `peak − left half-power point`, non-negative.
    pub left_width: T,
    /// `right half-power point − peak`, non-negative.
    pub right_width: T,
    pub total_width: T,
    /// The left boundary is the inter-peak minimum (or grid edge), not a
    /// true half-power crossing.
    pub left_is_minimum: bool,
    pub right_is_minimum: bool,
}

impl<T: Real> BeamFeature<T> {
    /// Grid indices covered by the beam region.
    pub fn region(&self) -> std::ops::RangeInclusive<usize> {
        self.left_half_index..=self.right_half_index
    }
}

fn leftmost_argmin<T: Real>(p: &[T], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for g in lo..=hi {
        if p[g] < p[best] {
            best = g;
        }
    }
    best
}

/// Scans outwards from `from` toward `minimum` for the first point at or
/// below `half`. Returns `(index, fell_back_to_minimum)`.
fn half_power_point<T: Real>(p: &[T], from: usize, minimum: usize, half: T) -> (usize, bool) {
    if minimum < from {
        for g in (minimum..from).rev() {
            if p[g] <= half {
                return (g, false);
            }
        }
    } else {
        for g in from + 1..=minimum {
            if p[g] <= half {
                return (g, false);
            }
        }
    }
    (minimum, true)
}

/// Half-power extent of every peak. The search on each side is bounded by
/// the neighbouring peak (or the grid edge); when no point drops to half
/// power before the inter-peak minimum, the minimum stands in.
pub fn extract_beam_features<T: Real>(spectrum: &SpatialSpectrum<T>, peaks: &[Peak<T>]) -> Vec<BeamFeature<T>> {
    let p = &spectrum.power;
    let grid = spectrum.grid();
    let last = p.len() - 1;
    peaks
        .iter()
        .enumerate()
        .map(|(i, peak)| {
            let half = peak.power / T::of(2.0);
            let left_bound = if i == 0 { 0 } else { peaks[i - 1].index };
            let right_bound = if i + 1 == peaks.len() { last } else { peaks[i + 1].index };
            let left_min = leftmost_argmin(p, left_bound, peak.index);
            let right_min = leftmost_argmin(p, peak.index, right_bound);
            let (l, lmin) = if left_min == peak.index {
                (peak.index, true)
            } else {
                half_power_point(p, peak.index, left_min, half)
            };
            let (r, rmin) = if right_min == peak.index {
                (peak.index, true)
            } else {
                half_power_point(p, peak.index, right_min, half)
            };
            let peak_angle = grid.angle(peak.index);
            let (la, ra) = (grid.angle(l), grid.angle(r));
            BeamFeature {
                peak_index: peak.index,
                peak_angle,
                peak_power: peak.power,
                left_half_index: l,
                right_half_index: r,
                left_half_angle: la,
                right_half_angle: ra,
                left_width: peak_angle - la,
                right_width: ra - peak_angle,
                total_width: ra - la,
                left_is_minimum: lmin,
                right_is_minimum: rmin,
            }
        })
        .collect()
}

/// Half-power offset in `u = sin θ` space: root of `|AF(u)|² = 1/2` for the
/// uniform array factor `AF(u) = sin(Mπdu) / (M sin(πdu))`.
pub fn half_power_sine_offset<T: Real>(cfg: &ArrayConfig<T>) -> T {
    let m = T::of(cfg.num_elements as f64);
    let pd = T::PI() * cfg.element_spacing;
    let af2 = |u: T| {
        let num = (m * pd * u).sin();
        let den = m * (pd * u).sin();
        (num / den).powi(2)
    };
    // first null of the array factor at u = 1 / (M d)
    let mut lo = T::of(1e-9);
    let mut hi = T::one() / (m * cfg.element_spacing);
    for _ in 0..100 {
        let mid = (lo + hi) / T::of(2.0);
        if af2(mid) > T::of(0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::of(2.0)
}

/// Broadside 3 dB beamwidth in degrees (≈12.8° for eight elements).
pub fn half_power_beamwidth<T: Real>(cfg: &ArrayConfig<T>) -> T {
    beamwidth_at(cfg, T::zero())
}

/// 3 dB beamwidth of a beam steered to `theta`, which broadens roughly as
/// `1 / cos θ` away from broadside.
pub fn beamwidth_at<T: Real>(cfg: &ArrayConfig<T>, theta: T) -> T {
    let u3 = half_power_sine_offset(cfg);
    let u = (theta * T::deg_to_rad()).sin();
    let hi = (u + u3).min(T::one()).asin();
    let lo = (u - u3).max(-T::one()).asin();
    (hi - lo) / T::deg_to_rad()
}

/// Spectrum-derived starting support.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization<T> {
    /// Sorted, deduplicated grid indices.
    pub indices: Vec<usize>,
    /// Indices contributed by each beam, aligned with `beams`.
    pub per_beam: Vec<Vec<usize>>,
    /// Candidate added in the valley between beam `i` and `i + 1`, if any.
    pub valley_candidates: Vec<Option<usize>>,
    pub beams: Vec<BeamFeature<T>>,
    pub noise_floor: NoiseFloor<T>,
    /// Noise power used downstream: `n_f`, or the noise gate (maximum less
    /// `eta_db`) when the floor is degenerate and `n_f` is really signal.
    pub noise_power: T,
    /// Effective peak detection threshold `p_t`.
    pub peak_threshold: T,
}

impl<T: Real> Initialization<T> {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Rebuilds `indices` from the per-beam and valley contributions.
    pub fn rebuild_indices(&mut self) {
        let mut all: Vec<usize> = self
            .per_beam
            .iter()
            .flatten()
            .copied()
            .chain(self.valley_candidates.iter().flatten().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        self.indices = all;
    }
}

/// Whether a beam is wide enough to hold two unresolved sources.
pub fn beam_holds_two<T: Real>(cfg: &ArrayConfig<T>, beam: &BeamFeature<T>) -> bool {
    beam.total_width > beamwidth_at(cfg, beam.peak_angle) + T::of(2.0) * cfg.grid_step
}

/// The two starting indices for a two-source beam: the peak shifted left
/// and right by half of the corresponding half-beam width, rounded up to
/// whole grid steps.
pub fn split_beam<T: Real>(beam: &BeamFeature<T>) -> [usize; 2] {
    let nl = beam.peak_index - beam.left_half_index;
    let nr = beam.right_half_index - beam.peak_index;
    [beam.peak_index - nl.div_ceil(2), beam.peak_index + nr.div_ceil(2)]
}

/// Drops peaks that are explained by sidelobe leakage of stronger peaks.
///
/// Peaks are visited strongest first. A candidate survives when its
/// amplitude `sqrt(P)` exceeds `Σ sqrt(P_j)·|AF(θ, θ_j)| + sqrt(threshold)`,
/// where the sum runs over the surviving stronger peaks and `AF` is the
/// normalized array pattern. With no stronger neighbours this reduces to
/// the plain `P > threshold` test.
pub fn reject_sidelobes<T: Real>(spectrum: &SpatialSpectrum<T>, peaks: &[Peak<T>], threshold: T) -> Vec<Peak<T>> {
    let cfg = &spectrum.config;
    let grid = spectrum.grid();
    let m = T::of(cfg.num_elements as f64);
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[b].power.partial_cmp(&peaks[a].power).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<(Peak<T>, Vec<Complex<T>>)> = Vec::new();
    for i in order {
        let peak = peaks[i];
        let a = steering_vector(cfg, grid.angle(peak.index));
        let leak: T = kept
            .iter()
            .map(|(p, b)| p.power.sqrt() * dot_conj(&a, b).norm() / m)
            .sum();
        if peak.power.sqrt() > leak + threshold.max(T::zero()).sqrt() {
            kept.push((peak, a));
        }
    }
    let mut out: Vec<Peak<T>> = kept.into_iter().map(|(p, _)| p).collect();
    out.sort_by_key(|p| p.index);
    out
}

/// Starting support from the spectrum: one index per narrow beam, two per
/// beam wider than the 3 dB beamwidth plus two grid steps.
pub fn initialize<T: Real>(spectrum: &SpatialSpectrum<T>, params: &SpectrumParams<T>) -> Initialization<T> {
    let cfg = spectrum.config;
    let noise_floor = estimate_noise_floor(spectrum, params.eta_db);
    let noise_power = if noise_floor.degenerate {
        noise_floor.value.min(spectrum.max_power() / db_to_linear(params.eta_db))
    } else {
        noise_floor.value
    };
    let threshold = noise_power * db_to_linear(params.threshold_offset_db);
    let peaks = if spectrum.max_power() > T::zero() {
        let raw = detect_peaks_above(spectrum, threshold);
        reject_sidelobes(spectrum, &raw, threshold)
    } else {
        Vec::new()
    };
    let mut beams = extract_beam_features(spectrum, &peaks);
    let capacity = cfg.num_elements - 1;
    if beams.len() > capacity {
        let mut order: Vec<usize> = (0..beams.len()).collect();
        order.sort_by(|&a, &b| beams[b].peak_power.partial_cmp(&beams[a].peak_power).unwrap_or(std::cmp::Ordering::Equal));
        order.truncate(capacity);
        order.sort_unstable();
        beams = order.into_iter().map(|i| beams[i]).collect();
    }
    let mut per_beam: Vec<Vec<usize>> = beams
        .iter()
        .map(|b| {
            if beam_holds_two(&cfg, b) {
                let [l, r] = split_beam(b);
                if l == r {
                    vec![l]
                } else {
                    vec![l, r]
                }
            } else {
                vec![b.peak_index]
            }
        })
        .collect();
    // undo the least pronounced splits until the support fits the array
    let mut total: usize = per_beam.iter().map(Vec::len).sum();
    if total > capacity {
        let mut split: Vec<usize> = (0..beams.len()).filter(|&i| per_beam[i].len() == 2).collect();
        split.sort_by(|&a, &b| {
            let ea = beams[a].total_width - beamwidth_at(&cfg, beams[a].peak_angle);
            let eb = beams[b].total_width - beamwidth_at(&cfg, beams[b].peak_angle);
            ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
        });
        for i in split {
            if total <= capacity {
                break;
            }
            per_beam[i] = vec![beams[i].peak_index];
            total -= 1;
        }
    }
    let valley_candidates = vec![None; beams.len().saturating_sub(1)];
    let mut init = Initialization {
        indices: Vec::new(),
        per_beam,
        valley_candidates,
        beams,
        noise_floor,
        noise_power,
        peak_threshold: threshold,
    };
    init.rebuild_indices();
    init
}

/// Beam features as CSV, one row per beam.
pub fn beams_to_csv<T: Real>(beams: &[BeamFeature<T>]) -> String {
    let mut out = String::from(
        "peak_angle_deg,peak_power_linear,peak_power_db,left_half_deg,right_half_deg,left_width_deg,right_width_deg,total_width_deg\n",
    );
    for b in beams {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            b.peak_angle,
            b.peak_power,
            linear_to_db(b.peak_power),
            b.left_half_angle,
            b.right_half_angle,
            b.left_width,
            b.right_width,
            b.total_width
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, synthesize_snapshot, synthesize_with_noise, Scene};
    use proptest::prelude::*;

    fn cfg() -> ArrayConfig<f64> {
        ArrayConfig::default()
    }

    fn spectrum_of(angles: &[f64], snr_db: f64, seed: u64) -> SpatialSpectrum<f64> {
        let amps = vec![30.0; angles.len()];
        let scene = Scene::with_real_amplitudes(angles.to_vec(), &amps, snr_db);
        let snap = synthesize_snapshot(&cfg(), &scene, seed).unwrap();
        bartlett_spectrum(&cfg(), &snap.data).unwrap()
    }

    fn flat(power: Vec<f64>) -> SpatialSpectrum<f64> {
        let config = ArrayConfig {
            grid_max: -60.0 + (power.len() - 1) as f64,
            ..cfg()
        };
        SpatialSpectrum { power, config }
    }

    #[test]
    fn matched_snapshot_peaks_at_m_squared() {
        let y = steering_vector(&cfg(), 0.0);
        let s = bartlett_spectrum(&cfg(), &y).unwrap();
        let g0 = cfg().grid().nearest(0.0);
        assert!((s.power[g0] - 64.0).abs() < 1e-9);
        assert_eq!(s.argmax(), g0);
        assert!(s.power.iter().all(|&p| (0.0..=64.0 + 1e-9).contains(&p)));
    }

    #[test]
    fn zero_snapshot_gives_zero_spectrum() {
        let y = vec![Complex::new(0.0, 0.0); 8];
        let s = bartlett_spectrum(&cfg(), &y).unwrap();
        assert!(s.power.iter().all(|&p| p == 0.0));
        assert!(initialize(&s, &SpectrumParams::default()).is_empty());
    }

    #[test]
    fn snapshot_length_checked() {
        let y = vec![Complex::new(0.0, 0.0); 7];
        assert!(matches!(
            bartlett_spectrum(&cfg(), &y),
            Err(DoaError::SnapshotLength { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn merged_lobe_for_close_pair() {
        // (0°, 8°) at 15 dB: one dominant lobe spanning both angles.
        let s = spectrum_of(&[0.0, 8.0], 15.0, 3);
        let nf = estimate_noise_floor(&s, 20.0);
        let init = initialize(&s, &SpectrumParams::default());
        assert_eq!(init.beams.len(), 1);
        let b = init.beams[0];
        assert!(b.left_half_angle < 0.0 && b.right_half_angle > 8.0);
        assert!(linear_to_db(b.peak_power / nf.value) >= 10.0);
    }

    #[test]
    fn flat_spectrum_noise_floor_is_degenerate() {
        let nf = estimate_noise_floor(&flat(vec![3.0; 11]), 20.0);
        assert_eq!(nf.value, 3.0);
        assert!(nf.degenerate);
    }

    #[test]
    fn noise_floor_tracks_noise_power() {
        // Monte-Carlo oracle: a single strong source over white noise of
        // known variance; the floor should sit near σ²·M.
        let c = cfg();
        let sigma2 = 28.46;
        let scene = Scene::with_real_amplitudes(vec![0.0], &[30.0], f64::INFINITY);
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let snap = synthesize_with_noise(&c, &scene, sigma2, seed);
            let s = bartlett_spectrum(&c, &snap.data).unwrap();
            let nf = estimate_noise_floor(&s, 20.0);
            let err_db = linear_to_db(nf.value / (sigma2 * 8.0)).abs();
            worst = worst.max(err_db);
        }
        assert!(worst < 3.0, "worst floor error {worst} dB");
    }

    #[test]
    fn peaks_resolved_pair() {
        // Coherent sources pull the Bartlett peaks off the true angles, so
        // the reference is the noiseless spectrum's maxima on a fine grid.
        let c = cfg();
        let grid = c.grid();
        let truth = [-15.0, 15.0];
        let clean: Vec<Complex<f64>> = (0..8)
            .map(|m| truth.iter().map(|&t| steering_vector(&c, t)[m] * 30.0).sum())
            .collect();
        let fine = |lo: f64, hi: f64| {
            let mut best = (lo, 0.0);
            let mut t = lo;
            while t <= hi {
                let p = dot_conj(&steering_vector(&c, t), &clean).norm_sqr();
                if p > best.1 {
                    best = (t, p);
                }
                t += 1e-3;
            }
            best.0
        };
        let reference = [fine(-30.0, 0.0), fine(0.0, 30.0)];
        let mut good = 0;
        for seed in 0..1000 {
            let s = spectrum_of(&truth, 15.0, seed);
            let init = initialize(&s, &SpectrumParams::default());
            let peaks: Vec<_> = init.beams.iter().map(|b| grid.angle(b.peak_index)).collect();
            if peaks.len() == 2 && peaks.iter().zip(&reference).all(|(p, r)| (p - r).abs() <= 1.0) {
                good += 1;
            }
        }
        assert!(good >= 990, "{good}/1000");
    }

    #[test]
    fn single_noiseless_source_single_peak() {
        let y = steering_vector(&cfg(), 12.0);
        let s = bartlett_spectrum(&cfg(), &y).unwrap();
        // floor chosen so that only the main lobe clears the threshold
        let peaks = detect_peaks(&s, 64.0 * 0.01, 10.0);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, cfg().grid().nearest(12.0));
    }

    #[test]
    fn merged_pair_gives_one_peak() {
        let s = spectrum_of(&[0.0, 8.0], 15.0, 11);
        let nf = estimate_noise_floor(&s, 20.0);
        assert_eq!(detect_peaks(&s, nf.value, 10.0).len(), 1);
    }

    #[test]
    fn plateau_reports_leftmost_index() {
        let s = flat(vec![0.0, 1.0, 5.0, 5.0, 5.0, 2.0, 0.0]);
        let peaks = detect_peaks_above(&s, 0.5);
        assert_eq!(peaks, vec![Peak { index: 2, power: 5.0 }]);
        // a shoulder is not a maximum
        let s = flat(vec![0.0, 5.0, 5.0, 6.0, 1.0]);
        assert_eq!(detect_peaks_above(&s, 0.5), vec![Peak { index: 3, power: 6.0 }]);
        assert!(detect_peaks_above(&s, 10.0).is_empty());
    }

    fn theta_3db_oracle(m: usize) -> f64 {
        // root-find |a(θ)ᴴ a(0)|² / M² = 1/2 on the broadside pattern
        let c = ArrayConfig::<f64> {
            num_elements: m,
            ..cfg()
        };
        let a0 = steering_vector(&c, 0.0);
        let f = |t: f64| dot_conj(&steering_vector(&c, t), &a0).norm_sqr() / (m * m) as f64 - 0.5;
        let (mut lo, mut hi) = (0.01, 20.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        2.0 * lo
    }

    #[test]
    fn beamwidth_matches_pattern_root() {
        let oracle = theta_3db_oracle(8);
        let bw = half_power_beamwidth(&cfg());
        assert!((bw - oracle).abs() < 1e-6, "{bw} vs {oracle}");
        assert!((bw - 12.8).abs() < 0.05);
        assert!(beamwidth_at(&cfg(), 45.0) > bw * 1.3);
    }

    #[test]
    fn single_beam_width_near_3db() {
        let y = steering_vector(&cfg(), 0.0);
        let s = bartlett_spectrum(&cfg(), &y).unwrap();
        let peaks = detect_peaks_above(&s, 64.0 * 0.2);
        let beams = extract_beam_features(&s, &peaks);
        assert_eq!(beams.len(), 1);
        let b = beams[0];
        assert!((b.total_width - theta_3db_oracle(8)).abs() <= 2.0);
        assert!(!b.left_is_minimum && !b.right_is_minimum);
        assert!(b.left_half_angle <= b.peak_angle && b.peak_angle <= b.right_half_angle);
    }

    #[test]
    fn merged_beam_is_wide() {
        let scene = Scene::with_real_amplitudes(vec![0.0, 8.0], &[30.0, 30.0], f64::INFINITY);
        let snap = synthesize_snapshot(&cfg(), &scene, 0).unwrap();
        let s = bartlett_spectrum(&cfg(), &snap.data).unwrap();
        let init = initialize(&s, &SpectrumParams::default());
        assert_eq!(init.beams.len(), 1);
        assert!(init.beams[0].total_width > half_power_beamwidth(&cfg()) + 2.0);
    }

    #[test]
    fn edge_peak_is_clamped() {
        let s = flat(vec![9.0, 7.0, 6.0, 3.0, 1.0, 0.5]);
        let peaks = detect_peaks_above(&s, 0.1);
        assert_eq!(peaks[0].index, 0);
        let b = extract_beam_features(&s, &peaks)[0];
        assert_eq!(b.left_half_index, 0);
        assert!(b.left_is_minimum);
        assert_eq!(b.right_half_index, 3);
        assert!(b.total_width.is_finite());
    }

    #[test]
    fn valley_minimum_substitutes_for_half_power() {
        let s = flat(vec![0.0, 8.0, 10.0, 7.0, 6.0, 9.0, 0.0]);
        let peaks = detect_peaks_above(&s, 1.0);
        assert_eq!(peaks.len(), 2);
        let beams = extract_beam_features(&s, &peaks);
        assert_eq!(beams[0].right_half_index, 4);
        assert!(beams[0].right_is_minimum);
        assert_eq!(beams[1].left_half_index, 4);
        assert!(beams[1].left_is_minimum);
    }

    #[test]
    fn isolated_off_grid_source_initializes_to_nearest_point() {
        let scene = Scene::with_real_amplitudes(vec![20.3], &[30.0], f64::INFINITY);
        let snap = synthesize_snapshot(&cfg(), &scene, 0).unwrap();
        let s = bartlett_spectrum(&cfg(), &snap.data).unwrap();
        let init = initialize(&s, &SpectrumParams::default());
        assert_eq!(init.indices, vec![cfg().grid().nearest(20.0)]);
    }

    #[test]
    fn merged_pair_splits_around_peak() {
        let s = spectrum_of(&[0.0, 8.0], 15.0, 5);
        let init = initialize(&s, &SpectrumParams::default());
        assert_eq!(init.indices.len(), 2);
        let peak = init.beams[0].peak_index;
        assert!(init.indices[0] < peak && init.indices[1] > peak);
    }

    #[test]
    fn five_source_scene_starts_incomplete() {
        let angles = [-30.0, -20.0, -10.0, 37.0, 45.0];
        let scene = Scene::with_real_amplitudes(angles.to_vec(), &[30.0; 5], f64::INFINITY);
        let snap = synthesize_snapshot(&cfg(), &scene, 0).unwrap();
        let s = bartlett_spectrum(&cfg(), &snap.data).unwrap();
        let init = initialize(&s, &SpectrumParams::default());
        assert_eq!(init.beams.len(), 3);
        assert!(init.indices.len() < 5);
    }

    #[test]
    fn seven_sources_fit_capacity() {
        let angles = vec![-45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0];
        for seed in 0..50 {
            let s = spectrum_of(&angles, 15.0, seed);
            let init = initialize(&s, &SpectrumParams::default());
            assert!(init.noise_floor.degenerate);
            assert!(init.indices.len() >= 4 && init.indices.len() <= 7);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = spectrum_of(&[0.0], 15.0, 0);
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("angle_deg,power_linear,power_db"));
        assert_eq!(lines.count(), 121);
        let init = initialize(&s, &SpectrumParams::default());
        assert_eq!(beams_to_csv(&init.beams).lines().count(), 1 + init.beams.len());
    }

    #[test]
    fn noiseless_on_grid_initialization_is_exact() {
        let c = cfg();
        let grid = c.grid();
        for deg in -50..=50 {
            let y = steering_vector(&c, deg as f64);
            let s = bartlett_spectrum(&c, &y).unwrap();
            let init = initialize(&s, &SpectrumParams::default());
            assert_eq!(init.indices, vec![grid.nearest(deg as f64)], "source at {deg}°");
        }
    }

    proptest! {
        #[test]
        fn peaks_are_local_maxima(seed in 0u64..10_000, a in -50.0f64..50.0, sep in 3.0f64..40.0) {
            let b = (a + sep).min(55.0);
            let s = spectrum_of(&[a, b], 10.0, seed);
            let nf = estimate_noise_floor(&s, 20.0);
            let peaks = detect_peaks(&s, nf.value, 10.0);
            let p = &s.power;
            for pk in &peaks {
                let g = pk.index;
                prop_assert!(g == 0 || p[g - 1] < p[g]);
                prop_assert!(g + 1 == p.len() || p[g + 1] <= p[g]);
            }
            prop_assert!(peaks.windows(2).all(|w| w[0].index < w[1].index));
        }

        #[test]
        fn beam_regions_do_not_overlap(seed in 0u64..10_000, k in 2usize..5) {
            let angles: Vec<f64> = (0..k).map(|i| -45.0 + 22.0 * i as f64).collect();
            let s = spectrum_of(&angles, 10.0, seed);
            let init = initialize(&s, &SpectrumParams::default());
            for w in init.beams.windows(2) {
                prop_assert!(w[0].right_half_index <= w[1].left_half_index);
            }
            for (beam, idx) in init.beams.iter().zip(&init.per_beam) {
                for g in idx {
                    prop_assert!(beam.region().contains(g));
                }
                prop_assert!(beam.left_half_angle <= beam.peak_angle);
                prop_assert!(beam.peak_angle <= beam.right_half_angle);
                prop_assert!(beam.total_width >= 0.0);
            }
            prop_assert!(init.indices.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
