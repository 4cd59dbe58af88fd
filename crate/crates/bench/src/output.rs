use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::metrics::ResultRow;
use crate::presets::CheckOutcome;
use crate::spec::{ExperimentSpec, SweepVariable};

const COLUMNS: [&str; 11] = [
    "method",
    "trials",
    "rmse_deg",
    "success_rate",
    "cardinality_failure_rate",
    "latency_mean_s",
    "latency_median_s",
    "latency_p99_s",
    "completion_rate",
    "mean_patch_rounds",
    "crlb_deg",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per line after a header; the first column is named after the
/// swept variable and absent values are empty fields.
pub fn write_csv<W: Write>(out: W, variable: SweepVariable, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once(variable.column()).chain(COLUMNS))?;
    for r in rows {
        w.write_record([
            r.sweep_value.to_string(),
            r.method.to_string(),
            r.trials.to_string(),
            opt(r.rmse_deg),
            r.success_rate.to_string(),
            r.cardinality_failure_rate.to_string(),
            r.latency_mean_s.to_string(),
            r.latency_median_s.to_string(),
            r.latency_p99_s.to_string(),
            opt(r.completion_rate),
            r.mean_patch_rounds.to_string(),
            opt(r.crlb_deg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub preset: Option<&'a str>,
    pub spec: &'a ExperimentSpec,
    pub rows: &'a [ResultRow],
    pub checks: &'a [CheckOutcome],
    pub passed: bool,
    pub elapsed_s: f64,
}

pub fn write_summary<W: Write>(out: W, summary: &Summary<'_>) -> Result<()> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TrialOutcome;
    use sapd::Method;

    #[test]
    fn header_and_empty_fields() {
        let o = TrialOutcome {
            sources: 2,
            squared_error: None,
            latency_s: 1e-3,
            patch_rounds: 1,
            failed: false,
        };
        let rows = [ResultRow::aggregate(-5.0, Method::Omp, &[o], None)];
        let mut buf = Vec::new();
        write_csv(&mut buf, SweepVariable::SnrDb, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("snr_db,method,trials,rmse_deg,"));
        assert!(lines.next().unwrap().starts_with("-5,omp,1,,0,1,"));
    }
}
