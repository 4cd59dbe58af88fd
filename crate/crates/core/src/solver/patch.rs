//! Recovery of sources missed by the spectrum initialization.
//!
//! Spectral valleys between adjacent beams are examined first, then the
//! beams themselves. Each call applies a single augmentation so the caller
//! can re-run the search after every change.

use super::params::{PowerBenchmarks, SolverParams};
use crate::num::{db_to_linear, linear_to_db, Real};
use crate::spectrum::{beam_holds_two, split_beam, Initialization, SpatialSpectrum};

/// Peak power levels of beams holding one, two and three sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLevels<T> {
    pub single: T,
    pub double: T,
    pub triple: T,
}

impl<T: Real> PowerLevels<T> {
    /// Levels `P`, `4P`, `9P`: `k` coherent equal sources add in amplitude.
    pub fn from_single(single: T) -> Self {
        Self {
            single,
            double: T::of(4.0) * single,
            triple: T::of(9.0) * single,
        }
    }

    /// Number of sources (1 to 3) whose level is nearest in dB.
    pub fn classify(&self, power: T) -> usize {
        let p = linear_to_db(power);
        let d = |level: T| (p - linear_to_db(level)).abs();
        let (d1, d2, d3) = (d(self.single), d(self.double), d(self.triple));
        if d3 < d2 && d3 < d1 {
            3
        } else if d2 < d1 {
            2
        } else {
            1
        }
    }
}

/// Resolves the configured benchmarks for one spectrum. Automatic
/// calibration takes the strongest beam classified as a single source,
/// falling back to the weakest beam.
pub fn power_levels<T: Real>(
    spectrum: &SpatialSpectrum<T>,
    init: &Initialization<T>,
    benchmarks: &PowerBenchmarks<T>,
) -> Option<PowerLevels<T>> {
    let cfg = &spectrum.config;
    match *benchmarks {
        PowerBenchmarks::Explicit { single, double, triple } => Some(PowerLevels { single, double, triple }),
        PowerBenchmarks::AmplitudePrior(a) => {
            let m = T::of(cfg.num_elements as f64);
            Some(PowerLevels::from_single(m * m * a * a))
        }
        PowerBenchmarks::Auto => {
            let single = init
                .beams
                .iter()
                .filter(|b| !beam_holds_two(cfg, b))
                .map(|b| b.peak_power)
                .fold(None, |m: Option<T>, p| Some(m.map_or(p, |m| m.max(p))));
            single
                .or_else(|| init.beams.iter().map(|b| b.peak_power).reduce(|a, b| a.min(b)))
                .map(PowerLevels::from_single)
        }
    }
}

/// What a patch round changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    /// Candidate added in the valley between beam `beam` and `beam + 1`.
    Valley { beam: usize, index: usize },
    /// Beam raised from `from` to `to` starting angles.
    Beam { beam: usize, from: usize, to: usize },
}

fn mean_power<T: Real>(power: &[T], lo: usize, hi: usize) -> T {
    let slice = &power[lo..=hi];
    slice.iter().copied().sum::<T>() / T::of(slice.len() as f64)
}

fn descending<T: Real>(mut items: Vec<(usize, T)>) -> Vec<usize> {
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    items.into_iter().map(|(i, _)| i).collect()
}

/// Whether the valley between beam `i` and `i + 1` is open for a candidate:
/// its minimum must sit clearly above the noise floor.
pub fn valley_is_elevated<T: Real>(
    spectrum: &SpatialSpectrum<T>,
    init: &Initialization<T>,
    i: usize,
    epsilon_p_db: T,
) -> bool {
    let (lo, hi) = valley_bounds(init, i);
    let min = spectrum.power[lo..=hi].iter().fold(T::infinity(), |m, &p| m.min(p));
    min > init.noise_power * db_to_linear(epsilon_p_db)
}

/// Valley region between the inner starting angles of two adjacent beams.
fn valley_bounds<T: Real>(init: &Initialization<T>, i: usize) -> (usize, usize) {
    let lo = *init.per_beam[i].iter().max().expect("beam has a starting angle");
    let hi = *init.per_beam[i + 1].iter().min().expect("beam has a starting angle");
    (lo.min(hi), lo.max(hi))
}

/// Applies the next augmentation in priority order and returns it, or
/// `None` when nothing is left to try within `capacity` total angles.
pub fn greedy_patch<T: Real>(
    spectrum: &SpatialSpectrum<T>,
    init: &mut Initialization<T>,
    levels: &PowerLevels<T>,
    params: &SolverParams<T>,
    capacity: usize,
) -> Option<Augmentation> {
    let grid = spectrum.grid();
    let p = &spectrum.power;
    let room = capacity.saturating_sub(init.indices.len());
    if room == 0 {
        return None;
    }

    let valleys: Vec<(usize, T)> = (0..init.valley_candidates.len())
        .filter(|&i| init.valley_candidates[i].is_none())
        .map(|i| {
            let (lo, hi) = valley_bounds(init, i);
            (i, mean_power(p, lo, hi))
        })
        .collect();
    for i in descending(valleys) {
        if !valley_is_elevated(spectrum, init, i, params.epsilon_p_db) {
            continue;
        }
        let (left, right) = (&init.beams[i], &init.beams[i + 1]);
        let centre = (left.right_half_angle + right.left_half_angle) / T::of(2.0);
        let index = grid.nearest(centre);
        if init.indices.contains(&index) {
            continue;
        }
        init.valley_candidates[i] = Some(index);
        init.rebuild_indices();
        return Some(Augmentation::Valley { beam: i, index });
    }

    let beams: Vec<(usize, T)> = init
        .beams
        .iter()
        .enumerate()
        .map(|(i, b)| (i, mean_power(p, b.left_half_index, b.right_half_index)))
        .collect();
    let order = descending(beams);
    // benchmark-driven growth first; once that is exhausted the strongest
    // beam below three angles gains one more
    let peaks: Vec<T> = init.beams.iter().map(|b| b.peak_power).collect();
    let by_power = |i: usize, _: usize| levels.classify(peaks[i]);
    let one_more = |_: usize, have: usize| (have + 1).min(MAX_PER_BEAM);
    grow_beam(init, &order, room, capacity, by_power).or_else(|| grow_beam(init, &order, room, capacity, one_more))
}

/// Most angles a single beam may hold.
pub const MAX_PER_BEAM: usize = 3;

fn grow_beam<T: Real>(
    init: &mut Initialization<T>,
    order: &[usize],
    room: usize,
    capacity: usize,
    target: impl Fn(usize, usize) -> usize,
) -> Option<Augmentation> {
    for &i in order {
        let beam = init.beams[i];
        let current = init.per_beam[i].clone();
        let wanted = target(i, current.len());
        if wanted <= current.len() {
            continue;
        }
        let mut next = if current.len() >= 2 {
            current.clone()
        } else {
            let [l, r] = split_beam(&beam);
            vec![l, r]
        };
        if wanted == 3 && next.len() == 2 {
            next.push((next[0] + next[1]) / 2);
        }
        next.sort_unstable();
        next.dedup();
        next.truncate(current.len() + room);
        let fresh = next.iter().filter(|g| !init.indices.contains(g)).count();
        // the peak index itself may be dropped when a beam is split
        if next.len() <= current.len() || fresh == 0 {
            continue;
        }
        let from = current.len();
        init.per_beam[i] = next;
        init.rebuild_indices();
        if init.indices.len() > capacity {
            init.per_beam[i] = current;
            init.rebuild_indices();
            continue;
        }
        return Some(Augmentation::Beam {
            beam: i,
            from,
            to: init.per_beam[i].len(),
        });
    }
    None
}
