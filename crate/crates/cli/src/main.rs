use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use sapd::array::synthesize_snapshot;
use sapd::{estimate, ArrayConfig, DoaEstimate, Scene, Snapshot, SolverParams};
use sapd_bench::output::{write_csv, write_summary, Summary};
use sapd_bench::presets::run_spec;
use sapd_bench::{calibrate, preset, ExperimentSpec, PRESET_NAMES};

const EXIT_INPUT: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sapd", version, about = "Single-snapshot DOA estimation for uniform linear arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a snapshot from a scene file.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        /// Snapshot JSON; the ground truth goes next to it as `<stem>.truth.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate source directions from a snapshot file.
    Estimate {
        #[arg(long)]
        snapshot: PathBuf,
        /// Estimate JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solver override, repeatable.
        #[arg(long = "params", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Use the noise variance stored in the snapshot as a known noise level.
        #[arg(long)]
        known_noise: bool,
    },
    /// Run a named experiment preset or an experiment file.
    Bench {
        #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
        preset: Option<String>,
        /// Experiment JSON instead of a preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Result CSV; the JSON summary is written beside it. CSV goes to
        /// stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Experiment or solver override, repeatable.
        #[arg(long = "params", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
}

/// Bad flags, unreadable or malformed input.
#[derive(Debug)]
struct InputError(anyhow::Error);

enum Failure {
    Input(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

fn input<T, E: Into<anyhow::Error>>(r: Result<T, E>, what: impl FnOnce() -> String) -> Result<T, InputError> {
    r.map_err(|e| InputError(e.into().context(what())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = input(std::fs::read_to_string(path), || format!("cannot read {}", path.display()))?;
    input(serde_json::from_str(&text), || format!("malformed {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    scene: &'a Scene<f64>,
    array: &'a ArrayConfig<f64>,
    seed: u64,
    noise_variance: f64,
}

fn simulate(scene_path: &Path, out: &Path, seed: u64) -> Result<(), Failure> {
    let scene: Scene<f64> = read_json(scene_path)?;
    let cfg = ArrayConfig::default();
    let snap = input(synthesize_snapshot(&cfg, &scene, seed), || {
        format!("scene {} is not usable", scene_path.display())
    })?;
    write_json(out, &snap)?;
    let truth = sidecar(out, ".truth.json");
    write_json(
        &truth,
        &GroundTruth {
            scene: &scene,
            array: &cfg,
            seed,
            noise_variance: snap.noise_variance,
        },
    )?;
    println!("wrote {} and {}", out.display(), truth.display());
    Ok(())
}

fn solver_params(overrides: &[String]) -> Result<SolverParams<f64>, InputError> {
    let mut p = SolverParams::default();
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| InputError(anyhow!("expected KEY=VALUE, got {kv:?}")))?;
        input(p.set(k.trim(), v.trim()), || format!("bad override {kv:?}"))?;
    }
    Ok(p)
}

fn report(est: &DoaEstimate<f64>) {
    let n = est.num_sources();
    println!("{n} target{}", if n == 1 { "" } else { "s" });
    for (theta, x) in est.angles.iter().zip(&est.amplitudes) {
        println!("  {theta:9.4} deg   |x| {:.3}", x.norm());
    }
    println!(
        "residual {:.4}, {} iterations, {} patch rounds, {}converged, {:.3} ms",
        est.residual,
        est.iterations,
        est.patch_rounds,
        if est.converged { "" } else { "not " },
        est.elapsed.as_secs_f64() * 1e3
    );
}

fn run_estimate(snapshot: &Path, out: Option<&Path>, overrides: &[String], known_noise: bool) -> Result<(), Failure> {
    let snap: Snapshot<f64> = read_json(snapshot)?;
    let mut params = solver_params(overrides)?;
    if known_noise {
        params.noise_variance = Some(snap.noise_variance);
    }
    let cfg = ArrayConfig::default();
    let est = input(estimate(&cfg, &snap.data, &params), || {
        format!("cannot estimate from {}", snapshot.display())
    })?;
    report(&est);
    if let Some(path) = out {
        write_json(path, &est)?;
    }
    Ok(())
}

fn bench(
    preset_name: Option<&str>,
    spec_path: Option<&Path>,
    out: Option<&Path>,
    trials: Option<usize>,
    seed: Option<u64>,
    overrides: &[String],
) -> Result<bool, Failure> {
    let (name, mut spec, checks) = match (preset_name, spec_path) {
        (Some(name), _) => {
            let p = preset(name).map_err(|e| {
                InputError(anyhow!("{e}; known presets: {}", PRESET_NAMES.join(", ")))
            })?;
            (Some(p.name), p.spec, p.checks)
        }
        (None, Some(path)) => {
            let spec: ExperimentSpec = read_json(path)?;
            (None, spec, Vec::new())
        }
        (None, None) => return Err(Failure::Input(anyhow!("give --preset or --spec"))),
    };
    if let Some(t) = trials {
        input(spec.set("trials", &t.to_string()), || "bad --trials".into())?;
    }
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| InputError(anyhow!("expected KEY=VALUE, got {kv:?}")))?;
        input(spec.set(k.trim(), v.trim()), || format!("bad override {kv:?}"))?;
    }
    input(spec.validate(), || "invalid experiment".into())?;

    let cal = calibrate();
    let start = std::time::Instant::now();
    let rows = run_spec(&spec).map_err(|e| Failure::Other(e.into()))?;
    let elapsed_s = start.elapsed().as_secs_f64();
    let outcomes: Vec<_> = checks.iter().map(|c| c.evaluate(&rows, &cal)).collect();
    let passed = outcomes.iter().all(|c| c.passed);

    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            write_csv(BufWriter::new(file), spec.sweep.variable, &rows).map_err(|e| Failure::Other(e.into()))?;
            let summary_path = path.with_extension("json");
            let file = File::create(&summary_path).with_context(|| format!("cannot create {}", summary_path.display()))?;
            let summary = Summary {
                preset: name.as_deref(),
                spec: &spec,
                rows: &rows,
                checks: &outcomes,
                passed,
                elapsed_s,
            };
            write_summary(BufWriter::new(file), &summary).map_err(|e| Failure::Other(e.into()))?;
            eprintln!("wrote {} and {}", path.display(), summary_path.display());
        }
        None => write_csv(io::stdout().lock(), spec.sweep.variable, &rows).map_err(|e| Failure::Other(e.into()))?,
    }
    for c in &outcomes {
        eprintln!("{c}");
    }
    eprintln!("{} rows in {elapsed_s:.2} s", rows.len());
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate { scene, out, seed } => simulate(scene, out, *seed).map(|_| true),
        Command::Estimate {
            snapshot,
            out,
            params,
            known_noise,
        } => run_estimate(snapshot, out.as_deref(), params, *known_noise).map(|_| true),
        Command::Bench {
            preset,
            spec,
            out,
            trials,
            seed,
            params,
        } => bench(preset.as_deref(), spec.as_deref(), out.as_deref(), *trials, *seed, params),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance thresholds not met");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
