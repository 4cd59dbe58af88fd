use std::hint::black_box;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Throughput of the calibration kernel on the core the latency bands were
/// set for, GFLOP/s.
pub const REFERENCE_GFLOPS: f64 = 2.0;

const ROWS: usize = 121;
const COLS: usize = 8;
const REPS: usize = 20_000;

/// Machine speed relative to the reference core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub measured_gflops: f64,
    /// Multiplier applied to latency limits; at least 1, so a fast machine
    /// is held to the nominal limits.
    pub scale: f64,
}

impl Calibration {
    pub fn limit(&self, nominal_s: f64) -> f64 {
        nominal_s * self.scale
    }
}

/// Times a dense complex matrix-vector product of the size of a Bartlett
/// scan (8 flops per complex multiply-add) and keeps the best of five runs.
pub fn calibrate() -> Calibration {
    let matrix: Vec<Complex64> = (0..ROWS * COLS)
        .map(|i| Complex64::from_polar(1.0, 0.37 * i as f64))
        .collect();
    let x: Vec<Complex64> = (0..COLS).map(|i| Complex64::new(1.0 + i as f64, 0.5)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); ROWS];
    let mut best = f64::INFINITY;
    for _ in 0..5 {
        let start = Instant::now();
        for _ in 0..REPS {
            let m = black_box(&matrix);
            for (r, o) in out.iter_mut().enumerate() {
                *o = m[r * COLS..(r + 1) * COLS].iter().zip(&x).map(|(a, b)| a * b).sum();
            }
            black_box(&mut out);
        }
        best = best.min(start.elapsed().as_secs_f64());
    }
    let flops = (REPS * ROWS * COLS * 8) as f64;
    let measured_gflops = flops / best / 1e9;
    Calibration {
        measured_gflops,
        scale: (REFERENCE_GFLOPS / measured_gflops).max(1.0),
    }
}
