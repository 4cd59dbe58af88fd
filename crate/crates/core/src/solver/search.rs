//! Grid search driven by the sign and size of the pseudo-derivative.

use num_complex::Complex;

use super::ls::amplitudes_and_beta;
use super::params::SolverParams;
use crate::array::{ArrayConfig, Grid};
use crate::error::{DoaError, Result};
use crate::num::{sign, Real};

/// A support set together with its least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportState<T> {
    /// Strictly increasing grid indices.
    pub indices: Vec<usize>,
    pub angles: Vec<T>,
    pub amplitudes: Vec<Complex<T>>,
    /// Pseudo-derivative per element, degrees.
    pub beta: Vec<T>,
    pub residual: T,
    pub iteration: usize,
}

impl<T: Real> SupportState<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One closed angular interval per support element, aligned with the
/// support's sorted indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSet<T> {
    pub intervals: Vec<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<T> {
    /// Lower-residual support of the final two iterates.
    pub support: SupportState<T>,
    pub rois: RoiSet<T>,
    /// Number of index updates performed.
    pub iterations: usize,
    /// The oscillation test fired before the iteration budget ran out.
    pub converged: bool,
    /// Sorted indices and residual of every evaluated iterate.
    pub trace: Vec<(Vec<usize>, T)>,
}

/// Signed step in grid units for each pseudo-derivative entry:
/// `n1·round(|β|/Δθ)` beyond one grid step, `n2` between half a step and
/// one step, and a single step otherwise. Exact zeros do not move.
pub fn search_step<T: Real>(beta: &[T], grid_step: T, n1: u32, n2: u32) -> Vec<i64> {
    let half = grid_step / T::of(2.0);
    beta.iter()
        .map(|&b| {
            let m = b.abs();
            let size = if m > grid_step {
                i64::from(n1) * (m / grid_step).round().to_i64().unwrap_or(i64::MAX / 4)
            } else if m > half {
                i64::from(n2)
            } else {
                1
            };
            size * sign(b)
        })
        .collect()
}

struct Proposal<T> {
    pos: Vec<usize>,
    ids: Vec<usize>,
    /// Positions after collision repair, before pruning.
    moved_to: Vec<usize>,
    fit: Fit<T>,
}

/// Fit at element positions kept in element order.
struct Fit<T> {
    amplitudes: Vec<Complex<T>>,
    beta: Vec<T>,
    residual: T,
}

fn fit_positions<T: Real>(cfg: &ArrayConfig<T>, grid: &Grid<T>, y: &[Complex<T>], pos: &[usize]) -> Result<Fit<T>> {
    let thetas: Vec<T> = pos.iter().map(|&g| grid.angle(g)).collect();
    let (fit, beta) = amplitudes_and_beta(cfg, y, &thetas)?;
    Ok(Fit {
        amplitudes: fit.solution,
        beta,
        residual: fit.residual_norm,
    })
}

/// Elements whose amplitude is below `floor · max|x|`.
fn weak_elements<T: Real>(x: &[Complex<T>], floor: T) -> Vec<usize> {
    let max = x.iter().fold(T::zero(), |m, z| m.max(z.norm()));
    let cut = floor * max;
    (0..x.len()).filter(|&i| x[i].norm() < cut || !(x[i].norm() > T::zero())).collect()
}

/// Fits the support, pruning weak elements until every amplitude clears
/// the floor. Returns the surviving element ids alongside the fit.
fn fit_pruned<T: Real>(
    cfg: &ArrayConfig<T>,
    grid: &Grid<T>,
    y: &[Complex<T>],
    pos: &mut Vec<usize>,
    ids: &mut Vec<usize>,
    floor: T,
) -> Result<Fit<T>> {
    loop {
        if pos.is_empty() {
            return Err(DoaError::Empty("support pruned to nothing"));
        }
        let thetas: Vec<T> = pos.iter().map(|&g| grid.angle(g)).collect();
        let fit = super::ls::ls_fit(cfg, y, &thetas)?;
        let weak = weak_elements(&fit.solution, floor);
        if weak.is_empty() {
            return fit_positions(cfg, grid, y, pos);
        }
        for &w in weak.iter().rev() {
            pos.remove(w);
            ids.remove(w);
        }
    }
}

fn to_state<T: Real>(grid: &Grid<T>, pos: &[usize], fit: &Fit<T>, iteration: usize) -> SupportState<T> {
    let mut order: Vec<usize> = (0..pos.len()).collect();
    order.sort_by_key(|&i| pos[i]);
    SupportState {
        indices: order.iter().map(|&i| pos[i]).collect(),
        angles: order.iter().map(|&i| grid.angle(pos[i])).collect(),
        amplitudes: order.iter().map(|&i| fit.amplitudes[i]).collect(),
        beta: order.iter().map(|&i| fit.beta[i]).collect(),
        residual: fit.residual,
        iteration,
    }
}

/// Fits a fixed support, pruning elements below the amplitude floor.
pub fn evaluate_support<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    indices: &[usize],
    amplitude_floor: T,
) -> Result<SupportState<T>> {
    let grid = cfg.grid();
    let mut pos: Vec<usize> = indices.to_vec();
    pos.sort_unstable();
    pos.dedup();
    let mut ids: Vec<usize> = (0..pos.len()).collect();
    let fit = fit_pruned(cfg, &grid, y, &mut pos, &mut ids, amplitude_floor)?;
    Ok(to_state(&grid, &pos, &fit, 0))
}

/// Separates elements that landed on the same grid index. The element with
/// the smaller `|β|` yields one step back toward where it came from (or
/// the other way when blocked). Returns `false` if no free slot is found.
fn repair_collisions<T: Real>(next: &mut [usize], prev: &[usize], beta: &[T], len: usize) -> bool {
    for _ in 0..4 * next.len() + 4 {
        let mut clash = None;
        'outer: for i in 0..next.len() {
            for j in i + 1..next.len() {
                if next[i] == next[j] {
                    clash = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = clash else { return true };
        let k = if beta[i].abs() < beta[j].abs() { i } else { j };
        let back: i64 = if prev[k] < next[k] { -1 } else { 1 };
        let here = next[k] as i64;
        let free = |g: i64| g >= 0 && (g as usize) < len && !next.iter().any(|&n| n as i64 == g);
        if free(here + back) {
            next[k] = (here + back) as usize;
        } else if free(here - back) {
            next[k] = (here - back) as usize;
        } else {
            return false;
        }
    }
    false
}

/// Iterates the support toward a stationary point of the residual.
///
/// Each round moves every element by [`search_step`] (a reversal of
/// direction is limited to half the previous move, at least one step),
/// clamps to the grid and separates collisions. No move may raise the
/// residual: long moves are halved until they do not, and a unit move that
/// would is narrowed to the single element with the largest `|β|` that
/// still descends. When nothing descends the search halts, and each ROI
/// spans the current position and the rejected step. It also stops when the
/// support repeats with period two while every element has moved at most
/// one step in each of the last three rounds.
pub fn sapd_search<T: Real>(
    cfg: &ArrayConfig<T>,
    y: &[Complex<T>],
    init: &[usize],
    params: &SolverParams<T>,
) -> Result<SearchOutcome<T>> {
    let grid = cfg.grid();
    let mut pos: Vec<usize> = init.to_vec();
    pos.sort_unstable();
    pos.dedup();
    if pos.is_empty() {
        return Err(DoaError::Empty("initial support"));
    }
    if pos.len() >= cfg.num_elements {
        return Err(DoaError::Cardinality {
            cardinality: pos.len(),
            elements: cfg.num_elements,
        });
    }
    let mut ids: Vec<usize> = (0..pos.len()).collect();
    let mut fit = fit_pruned(cfg, &grid, y, &mut pos, &mut ids, params.amplitude_floor)?;

    // per element id: moves so far (most recent last)
    let mut moves: Vec<Vec<i64>> = vec![Vec::new(); init.len()];
    let mut sets: Vec<Vec<usize>> = vec![sorted(&pos)];
    let mut trace = vec![(sorted(&pos), fit.residual)];
    let mut prev: Option<(Vec<usize>, Vec<usize>, Fit<T>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    // element positions one step past the final support when the search
    // halts because no move descends
    let mut halted_at: Option<Vec<usize>> = None;

    while iterations < params.max_iters {
        let mut steps = search_step(&fit.beta, grid.step, params.n1, params.n2);
        for (e, s) in steps.iter_mut().enumerate() {
            if let Some(&last) = moves[ids[e]].last() {
                if last != 0 && s.signum() == -last.signum() {
                    *s = s.signum() * (last.abs() / 2).max(1);
                }
            }
        }
        let propose = |steps: &[i64]| -> Option<Proposal<T>> {
            let mut next: Vec<usize> = pos
                .iter()
                .zip(steps)
                .map(|(&p, &s)| (p as i64 + s).clamp(0, grid.len as i64 - 1) as usize)
                .collect();
            if !repair_collisions(&mut next, &pos, &fit.beta, grid.len) {
                return None;
            }
            let before = next.clone();
            let mut next_ids = ids.clone();
            let next_fit = fit_pruned(cfg, &grid, y, &mut next, &mut next_ids, params.amplitude_floor).ok()?;
            Some(Proposal {
                pos: next,
                ids: next_ids,
                moved_to: before,
                fit: next_fit,
            })
        };
        let descends = |p: &Option<Proposal<T>>| {
            p.as_ref()
                .is_some_and(|p| p.fit.residual <= fit.residual && sorted(&p.pos) != sorted(&pos))
        };

        // long moves are halved while they raise the residual
        let mut proposal = propose(&steps);
        while !descends(&proposal) && steps.iter().any(|s| s.abs() > 1) {
            for s in steps.iter_mut() {
                if s.abs() > 1 {
                    *s /= 2;
                }
            }
            proposal = propose(&steps);
        }
        if !descends(&proposal) {
            // a single element, largest |β| first, may still descend
            let mut order: Vec<usize> = (0..steps.len()).filter(|&e| steps[e] != 0).collect();
            order.sort_by(|&a, &b| fit.beta[b].abs().partial_cmp(&fit.beta[a].abs()).unwrap_or(std::cmp::Ordering::Equal));
            proposal = if order.len() > 1 {
                order.into_iter().find_map(|e| {
                    let mut one = vec![0; steps.len()];
                    one[e] = steps[e];
                    Some(propose(&one)).filter(|p| descends(p)).flatten()
                })
            } else {
                None
            };
        }
        let Some(next) = proposal else {
            halted_at = Some(
                pos.iter()
                    .zip(&steps)
                    .map(|(&p, &s)| (p as i64 + s).clamp(0, grid.len as i64 - 1) as usize)
                    .collect(),
            );
            converged = true;
            break;
        };
        iterations += 1;
        for (e, &id) in ids.iter().enumerate() {
            moves[id].push(next.moved_to[e] as i64 - pos[e] as i64);
        }
        prev = Some((
            std::mem::replace(&mut pos, next.pos),
            std::mem::replace(&mut ids, next.ids),
            std::mem::replace(&mut fit, next.fit),
        ));
        sets.push(sorted(&pos));
        trace.push((sorted(&pos), fit.residual));

        let t = sets.len() - 1;
        if t >= 2 && sets[t - 2] == sets[t] {
            let settled = ids.iter().all(|&id| {
                let m = &moves[id];
                m.len() >= 3 && m[m.len() - 3..].iter().all(|s| s.abs() <= 1)
            });
            if settled {
                converged = true;
                break;
            }
        }
    }

    let last = to_state(&grid, &pos, &fit, iterations);
    let (support, pairs) = match (halted_at, prev) {
        (Some(beyond), _) => {
            let pairs: Vec<(usize, usize)> = pos.iter().copied().zip(beyond).collect();
            (last, Some(pairs))
        }
        (None, Some((ppos, pids, pfit))) if pids == ids => {
            let pairs: Vec<(usize, usize)> = pos.iter().copied().zip(ppos.iter().copied()).collect();
            let chosen = if pfit.residual < fit.residual {
                to_state(&grid, &ppos, &pfit, iterations.saturating_sub(1))
            } else {
                last
            };
            (chosen, Some(pairs))
        }
        _ => (last, None),
    };
    let rois = match pairs {
        Some(pairs) => roi_spans(&grid, &pairs),
        None => RoiSet {
            intervals: support.angles.iter().map(|&a| (a, a)).collect(),
        },
    };
    Ok(SearchOutcome {
        support,
        rois,
        iterations,
        converged,
        trace,
    })
}

/// Element-wise span of two positions, ordered by the first position and
/// clipped so neighbouring spans do not overlap.
fn roi_spans<T: Real>(grid: &Grid<T>, pairs: &[(usize, usize)]) -> RoiSet<T> {
    let mut spans: Vec<(usize, (T, T))> = pairs
        .iter()
        .map(|&(a, b)| (a, (grid.angle(a.min(b)), grid.angle(a.max(b)))))
        .collect();
    spans.sort_by_key(|s| s.0);
    for i in 1..spans.len() {
        let split = (grid.angle(spans[i - 1].0) + grid.angle(spans[i].0)) / T::of(2.0);
        if spans[i - 1].1 .1 > spans[i].1 .0 {
            spans[i - 1].1 .1 = spans[i - 1].1 .1.min(split);
            spans[i].1 .0 = spans[i].1 .0.max(split);
        }
    }
    RoiSet {
        intervals: spans.into_iter().map(|s| s.1).collect(),
    }
}

fn sorted(pos: &[usize]) -> Vec<usize> {
    let mut s = pos.to_vec();
    s.sort_unstable();
    s
}
