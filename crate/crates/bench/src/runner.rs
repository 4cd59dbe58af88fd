use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sapd::array::synthesize_snapshot;
use sapd::baselines::{crlb, dml_exhaustive, omp, BASELINE_GRID_STEP};
use sapd::{estimate, ArrayConfig, DoaEstimate, Method, Scene, SolverParams};

use crate::error::{BenchError, Result};
use crate::metrics::{matched_squared_error, ResultRow, TrialOutcome};
use crate::spec::{ExperimentSpec, SweepVariable};

/// Frame interval the per-frame workload has to fit in, seconds.
pub const FRAME_BUDGET_S: f64 = 0.05;

/// Worker pool sized by `SAPD_THREADS`, never above the available cores.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let n = std::env::var("SAPD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .map_or(cores, |n| n.min(cores));
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)
}

/// Runs one estimator. Baselines search the finer baseline grid and are
/// told the true source count; only SAPD is blind to it.
pub fn run_estimator(
    method: Method,
    cfg: &ArrayConfig<f64>,
    y: &[num_complex::Complex<f64>],
    params: &SolverParams<f64>,
    sources: usize,
) -> sapd::Result<DoaEstimate<f64>> {
    match method {
        Method::Sapd => estimate(cfg, y, params),
        Method::Omp => Ok(omp(&baseline_grid(cfg), y, sources, 0.0)?.estimate),
        Method::Dml => Ok(dml_exhaustive(&baseline_grid(cfg), y, sources)?.estimate),
    }
}

fn baseline_grid(cfg: &ArrayConfig<f64>) -> ArrayConfig<f64> {
    cfg.with_grid_step(BASELINE_GRID_STEP.min(cfg.grid_step))
}

fn score(method: Method, cfg: &ArrayConfig<f64>, scene: &Scene<f64>, y: &[num_complex::Complex<f64>], params: &SolverParams<f64>) -> TrialOutcome {
    let start = Instant::now();
    let result = run_estimator(method, cfg, y, params, scene.num_sources());
    let latency_s = start.elapsed().as_secs_f64();
    match result {
        Ok(est) => TrialOutcome {
            sources: scene.num_sources(),
            squared_error: matched_squared_error(&est.angles, &scene.angles),
            latency_s,
            patch_rounds: est.patch_rounds,
            failed: false,
        },
        Err(_) => TrialOutcome {
            sources: scene.num_sources(),
            squared_error: None,
            latency_s,
            patch_rounds: 0,
            failed: true,
        },
    }
}

/// Scene, snapshot and the parameters the estimators see for one trial.
struct Prepared {
    scene: Scene<f64>,
    y: Vec<num_complex::Complex<f64>>,
    params: SolverParams<f64>,
    noise_variance: f64,
}

fn prepare(spec: &ExperimentSpec, params: &SolverParams<f64>, value: f64, trial: usize) -> Result<Prepared> {
    let scene = spec.trial_scene(value, trial);
    let snap = synthesize_snapshot(&spec.array, &scene, spec.trial_seed(trial))?;
    let mut params = *params;
    if spec.known_noise {
        params.noise_variance = Some(snap.noise_variance);
    }
    Ok(Prepared {
        scene,
        y: snap.data,
        params,
        noise_variance: snap.noise_variance,
    })
}

/// Mean over angles of the squared bound.
fn crlb_power(cfg: &ArrayConfig<f64>, scene: &Scene<f64>, sigma2: f64) -> f64 {
    let b = crlb(cfg, scene, sigma2);
    if b.is_empty() {
        return 0.0;
    }
    b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64
}

fn rms_bound(powers: &[f64]) -> Option<f64> {
    let v = (powers.iter().sum::<f64>() / powers.len().max(1) as f64).sqrt();
    v.is_finite().then_some(v)
}

/// Every estimator on every trial at every sweep point. Trials run in
/// parallel; results are collected in trial order, so rows depend only on
/// the spec.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let params = spec.solver_params()?;
    let pool = thread_pool()?;
    let mut rows = Vec::with_capacity(spec.sweep.values.len() * spec.estimators.len());
    for &value in &spec.sweep.values {
        let trials: Vec<(Vec<TrialOutcome>, f64)> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let p = prepare(spec, &params, value, t)?;
                    let outcomes = spec
                        .estimators
                        .iter()
                        .map(|&m| score(m, &spec.array, &p.scene, &p.y, &p.params))
                        .collect();
                    Ok((outcomes, crlb_power(&spec.array, &p.scene, p.noise_variance)))
                })
                .collect::<Result<_>>()
        })?;
        let bound = rms_bound(&trials.iter().map(|t| t.1).collect::<Vec<_>>());
        for (i, &method) in spec.estimators.iter().enumerate() {
            let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t.0[i].clone()).collect();
            rows.push(ResultRow::aggregate(value, method, &outcomes, bound));
        }
    }
    Ok(rows)
}

fn require(spec: &ExperimentSpec, variables: &[SweepVariable], op: &str) -> Result<()> {
    if variables.contains(&spec.sweep.variable) {
        Ok(())
    } else {
        Err(BenchError::InvalidSpec(format!(
            "{op} cannot sweep {}",
            spec.sweep.variable.column()
        )))
    }
}

/// RMSE against SNR or separation.
pub fn run_rmse_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    require(spec, &[SweepVariable::SnrDb, SweepVariable::SeparationDeg], "rmse sweep")?;
    run_sweep(spec)
}

/// Success rate against the separation of two sources.
pub fn run_resolution_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    require(spec, &[SweepVariable::SeparationDeg], "resolution sweep")?;
    run_sweep(spec)
}

/// Accuracy and latency against the number of sources.
pub fn run_source_count_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    require(spec, &[SweepVariable::SourceCount], "source count sweep")?;
    run_sweep(spec)
}

/// SAPD on the fixed scene at the first sweep point.
pub fn run_patch_scenario(spec: &ExperimentSpec) -> Result<ResultRow> {
    let mut single = spec.clone();
    single.estimators = vec![Method::Sapd];
    single.sweep.values.truncate(1);
    require(&single, &[SweepVariable::SnrDb], "patch scenario")?;
    Ok(run_sweep(&single)?.remove(0))
}

/// One frame's cells processed back to back.
struct Batch {
    /// Wall-clock offset at which each cell finished, seconds.
    finish_s: Vec<f64>,
    outcomes: Vec<TrialOutcome>,
}

fn run_batch(spec: &ExperimentSpec, params: &SolverParams<f64>, method: Method, cells: usize, batch: usize) -> Result<Batch> {
    let work: Vec<Prepared> = (0..cells)
        .map(|c| prepare(spec, params, 0.0, batch * cells + c))
        .collect::<Result<_>>()?;
    let mut finish_s = Vec::with_capacity(cells);
    let mut outcomes = Vec::with_capacity(cells);
    let start = Instant::now();
    for p in &work {
        outcomes.push(score(method, &spec.array, &p.scene, &p.y, &p.params));
        finish_s.push(start.elapsed().as_secs_f64());
    }
    Ok(Batch { finish_s, outcomes })
}

fn completed_share(batch: &Batch, t: f64) -> f64 {
    if batch.finish_s.is_empty() {
        return 1.0;
    }
    batch.finish_s.iter().filter(|&&f| f <= t).count() as f64 / batch.finish_s.len() as f64
}

/// Sequential workload of `cells` cells per frame, repeated over `trials`
/// frames. Latency columns describe whole frames; accuracy columns pool
/// every cell; the completion rate is the share of cells done within
/// [`FRAME_BUDGET_S`].
pub fn run_throughput(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    require(spec, &[SweepVariable::Cells], "throughput")?;
    spec.validate()?;
    let params = spec.solver_params()?;
    let mut rows = Vec::new();
    for &value in &spec.sweep.values {
        let cells = value.max(0.0) as usize;
        for &method in &spec.estimators {
            let batches: Vec<Batch> = (0..spec.trials)
                .map(|b| run_batch(spec, &params, method, cells, b))
                .collect::<Result<_>>()?;
            let outcomes: Vec<TrialOutcome> = batches.iter().flat_map(|b| b.outcomes.iter().cloned()).collect();
            let mut row = ResultRow::aggregate(value, method, &outcomes, None);
            let totals: Vec<f64> = batches.iter().map(|b| b.finish_s.last().copied().unwrap_or(0.0)).collect();
            let lat = crate::metrics::LatencyStats::from_samples(&totals);
            row.trials = spec.trials;
            row.latency_mean_s = lat.mean;
            row.latency_median_s = lat.median;
            row.latency_p99_s = lat.p99;
            row.completion_rate =
                Some(batches.iter().map(|b| completed_share(b, FRAME_BUDGET_S)).sum::<f64>() / batches.len() as f64);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionPoint {
    pub time_s: f64,
    /// `N_e / N_RD`: share of the frame's cells finished by `time_s`.
    pub rate: f64,
}

/// Completion rate against elapsed time for a fixed number of cells,
/// averaged over `spec.trials` frames. Uses the first estimator.
pub fn completion_curve(spec: &ExperimentSpec, cells: usize, times_s: &[f64]) -> Result<Vec<CompletionPoint>> {
    spec.validate()?;
    let params = spec.solver_params()?;
    let method = spec.estimators[0];
    let batches: Vec<Batch> = (0..spec.trials)
        .map(|b| run_batch(spec, &params, method, cells, b))
        .collect::<Result<_>>()?;
    Ok(times_s
        .iter()
        .map(|&t| CompletionPoint {
            time_s: t,
            rate: batches.iter().map(|b| completed_share(b, t)).sum::<f64>() / batches.len() as f64,
        })
        .collect())
}
