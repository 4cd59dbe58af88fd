use serde::{Deserialize, Serialize};

use sapd::Method;

/// A trial counts as resolved when the source count is right and its own
/// RMSE is below this, degrees.
pub const SUCCESS_RMSE_DEG: f64 = 0.5;

/// Sum of squared angle errors under the minimum-cost pairing of estimates
/// with true angles, or `None` when the counts differ.
///
/// On a line, pairing in sorted order minimizes any convex cost of the
/// differences, so no assignment solver is needed.
pub fn matched_squared_error(estimated: &[f64], truth: &[f64]) -> Option<f64> {
    if estimated.len() != truth.len() {
        return None;
    }
    let mut e = estimated.to_vec();
    let mut t = truth.to_vec();
    e.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    Some(e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Result of one estimator on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub sources: usize,
    pub squared_error: Option<f64>,
    pub latency_s: f64,
    pub patch_rounds: usize,
    /// The estimator returned an error instead of an estimate.
    pub failed: bool,
}

impl TrialOutcome {
    pub fn resolved(&self) -> bool {
        self.squared_error
            .is_some_and(|se| (se / self.sources.max(1) as f64).sqrt() < SUCCESS_RMSE_DEG)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self { mean: 0.0, median: 0.0, p99: 0.0 };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            median: rank(0.5),
            p99: rank(0.99),
        }
    }
}

/// Aggregate of one estimator at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub method: Method,
    pub trials: usize,
    /// Over trials with the right source count only; `None` if there are none.
    pub rmse_deg: Option<f64>,
    pub success_rate: f64,
    pub cardinality_failure_rate: f64,
    pub latency_mean_s: f64,
    pub latency_median_s: f64,
    pub latency_p99_s: f64,
    /// Share of cells finished inside the frame budget (throughput runs).
    pub completion_rate: Option<f64>,
    pub mean_patch_rounds: f64,
    /// Root-mean-square single-snapshot Cramér-Rao bound, degrees.
    pub crlb_deg: Option<f64>,
}

impl ResultRow {
    /// The RMSE divides by the number of matched sources, i.e. `M_t·K`
    /// restricted to trials with the right count.
    pub fn aggregate(sweep_value: f64, method: Method, outcomes: &[TrialOutcome], crlb_deg: Option<f64>) -> Self {
        let n = outcomes.len();
        let matched: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.squared_error.is_some()).collect();
        let rmse_deg = (!matched.is_empty()).then(|| {
            let se: f64 = matched.iter().filter_map(|o| o.squared_error).sum();
            let count: usize = matched.iter().map(|o| o.sources).sum();
            if count == 0 {
                0.0
            } else {
                (se / count as f64).sqrt()
            }
        });
        let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let latencies: Vec<f64> = outcomes.iter().map(|o| o.latency_s).collect();
        let lat = LatencyStats::from_samples(&latencies);
        Self {
            sweep_value,
            method,
            trials: n,
            rmse_deg,
            success_rate: rate(outcomes.iter().filter(|o| o.resolved()).count()),
            cardinality_failure_rate: rate(n - matched.len()),
            latency_mean_s: lat.mean,
            latency_median_s: lat.median,
            latency_p99_s: lat.p99,
            completion_rate: None,
            mean_patch_rounds: if n == 0 {
                0.0
            } else {
                outcomes.iter().map(|o| o.patch_rounds as f64).sum::<f64>() / n as f64
            },
            crlb_deg,
        }
    }

    /// The row with every wall-clock column zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            latency_mean_s: 0.0,
            latency_median_s: 0.0,
            latency_p99_s: 0.0,
            completion_rate: self.completion_rate.map(|_| 0.0),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(sources: usize, se: Option<f64>) -> TrialOutcome {
        TrialOutcome {
            sources,
            squared_error: se,
            latency_s: 1e-4,
            patch_rounds: 0,
            failed: false,
        }
    }

    #[test]
    fn cardinality_mismatch_is_unmatched() {
        assert_eq!(matched_squared_error(&[1.0], &[1.0, 2.0]), None);
        assert_eq!(matched_squared_error(&[], &[]), Some(0.0));
    }

    #[test]
    fn rmse_excludes_cardinality_failures() {
        let rows = [outcome(2, Some(0.08)), outcome(2, None), outcome(2, Some(0.0))];
        let r = ResultRow::aggregate(15.0, Method::Sapd, &rows, None);
        assert!((r.rmse_deg.unwrap() - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((r.cardinality_failure_rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.success_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_failures_leave_rmse_absent() {
        let r = ResultRow::aggregate(15.0, Method::Omp, &[outcome(2, None)], None);
        assert_eq!(r.rmse_deg, None);
        assert_eq!(r.success_rate, 0.0);
    }

    #[test]
    fn percentiles() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let l = LatencyStats::from_samples(&s);
        assert_eq!(l.median, 50.0);
        assert_eq!(l.p99, 99.0);
        assert_eq!(l.mean, 50.5);
        assert_eq!(LatencyStats::from_samples(&[3.0]).p99, 3.0);
    }
}
