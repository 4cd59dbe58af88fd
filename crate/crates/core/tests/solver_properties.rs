use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sapd::array::{steering_vector, synthesize_snapshot};
use sapd::baselines::dml_exhaustive;
use sapd::solver::{amplitudes_and_beta, sapd_search};
use sapd::spectrum::{bartlett_spectrum, initialize};
use sapd::{estimate, ArrayConfig, PowerBenchmarks, Scene, SolverParams};

fn cfg() -> ArrayConfig<f64> {
    ArrayConfig::default()
}

/// Settings for noiseless input: a near-zero recovery threshold and the
/// known source amplitude for the beam power levels.
fn noiseless_params() -> SolverParams<f64> {
    SolverParams {
        epsilon: Some(1e-9),
        benchmarks: PowerBenchmarks::AmplitudePrior(30.0),
        ..SolverParams::default()
    }
}

fn beta_at(y: &[Complex<f64>], theta: f64) -> f64 {
    amplitudes_and_beta(&cfg(), y, &[theta]).unwrap().1[0]
}

/// `k` distinct integer angles in `[lo, hi]`, pairwise at least `sep` apart.
fn spaced_angles(rng: &mut ChaCha8Rng, k: usize, sep: f64, lo: i32, hi: i32) -> Vec<f64> {
    loop {
        let mut a: Vec<f64> = (0..k).map(|_| rng.random_range(lo..=hi) as f64).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if a.windows(2).all(|w| w[1] - w[0] >= sep) {
            return a;
        }
    }
}

fn random_amplitudes(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex<f64>> {
    (0..k)
        .map(|_| Complex::from_polar(rng.random_range(20.0..40.0), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

#[test]
fn beta_points_toward_the_source() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let trials = 500;
    let mut hits = 0;
    for _ in 0..trials {
        let theta: f64 = rng.random_range(-50.0..50.0);
        let y = steering_vector(&cfg(), theta);
        let (left, right) = (theta.floor(), theta.ceil());
        if left == right {
            continue;
        }
        if beta_at(&y, left) > 0.0 && beta_at(&y, right) < 0.0 {
            hits += 1;
        }
    }
    assert!(hits * 100 >= trials * 99, "{hits}/{trials}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn beta_matches_offset_within_half_step(g in -50i32..=50, offset in -0.5f64..=0.5, phase in 0.0f64..std::f64::consts::TAU) {
        let theta = g as f64 + offset;
        let s = Complex::from_polar(30.0, phase);
        let y: Vec<_> = steering_vector(&cfg(), theta).into_iter().map(|v| v * s).collect();
        let b = beta_at(&y, g as f64);
        prop_assert!((b - offset).abs() <= 0.1, "beta {} offset {}", b, offset);
    }

    #[test]
    fn estimate_is_sorted_and_in_bounds(a in -55.0f64..55.0, b in -55.0f64..55.0, seed in 0u64..1000) {
        let c = cfg();
        let scene = Scene::with_real_amplitudes(vec![a, b], &[30.0, 20.0], 10.0);
        let y = synthesize_snapshot(&c, &scene, seed).unwrap().data;
        let est = estimate(&c, &y, &SolverParams::default()).unwrap();
        prop_assert!(est.residual >= 0.0);
        prop_assert!(est.num_sources() < c.num_elements);
        prop_assert!(est.angles.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(est.angles.iter().all(|&t| (-60.0..=60.0).contains(&t)));
        prop_assert_eq!(est.angles.len(), est.amplitudes.len());
    }
}

#[test]
fn noiseless_on_grid_scenes_are_recovered_exactly() {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let k = rng.random_range(1..=3);
        let angles = spaced_angles(&mut rng, k, 6.0, -50, 50);
        let scene = Scene::noiseless(angles.clone(), random_amplitudes(&mut rng, k));
        let y = synthesize_snapshot(&c, &scene, 0).unwrap().data;
        let est = estimate(&c, &y, &noiseless_params()).unwrap();
        assert_eq!(est.angles.len(), k, "trial {trial}: {angles:?} -> {:?}", est.angles);
        assert!(est.residual < 1e-9, "trial {trial}: residual {}", est.residual);
        for (e, t) in est.angles.iter().zip(&angles) {
            assert!((e - t).abs() < 1e-6, "trial {trial}: {angles:?} -> {:?}", est.angles);
        }
    }
}

#[test]
fn search_support_matches_exhaustive_ml() {
    let c = cfg();
    let grid = c.grid();
    let params = noiseless_params();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 200;
    let mut same = 0;
    for _ in 0..trials {
        let angles = spaced_angles(&mut rng, 2, 6.0, -50, 50);
        let scene = Scene::noiseless(angles, random_amplitudes(&mut rng, 2));
        let y = synthesize_snapshot(&c, &scene, 0).unwrap().data;
        let est = estimate(&c, &y, &params).unwrap();
        let ours: Vec<usize> = est.angles.iter().map(|&t| grid.nearest(t)).collect();
        let dml: Vec<usize> = dml_exhaustive(&c, &y, 2).unwrap().angles().iter().map(|&t| grid.nearest(t)).collect();
        if ours == dml {
            same += 1;
        }
    }
    assert!(same * 100 >= trials * 99, "{same}/{trials}");
}

/// Search runs from the spectrum initialization on two-source scenes with
/// SNR drawn from [10, 25] dB and separation from [6°, 20°].
fn two_source_searches(trials: usize, seed: u64) -> Vec<sapd::solver::SearchOutcome<f64>> {
    let c = cfg();
    let params = SolverParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|i| {
            let first: f64 = rng.random_range(-40..=20) as f64;
            let sep: f64 = rng.random_range(6..=20) as f64;
            let snr = rng.random_range(10.0..25.0);
            let scene = Scene::with_real_amplitudes(vec![first, first + sep], &[30.0, 30.0], snr);
            let y = synthesize_snapshot(&c, &scene, i as u64).unwrap().data;
            let spectrum = bartlett_spectrum(&c, &y).unwrap();
            let init = initialize(&spectrum, &params.spectrum);
            sapd_search(&c, &y, &init.indices, &params).unwrap()
        })
        .collect()
}

fn near(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| x.abs_diff(y) <= 1)
}

#[test]
fn residual_descends_near_convergence() {
    let mut violations = Vec::new();
    for (i, out) in two_source_searches(1000, 21).iter().enumerate() {
        let last = &out.trace.last().unwrap().0;
        let Some(start) = (1..out.trace.len()).find(|&t| near(&out.trace[t - 1].0, last) && near(&out.trace[t].0, last)) else {
            continue;
        };
        for t in start + 1..out.trace.len() {
            if out.trace[t].1 > out.trace[t - 1].1 + 1e-9 {
                violations.push(i);
            }
        }
    }
    assert!(violations.is_empty(), "{} violations: {:?}", violations.len(), &violations[..violations.len().min(10)]);
}

#[test]
fn search_finishes_within_fifteen_iterations() {
    let outs = two_source_searches(1000, 22);
    let quick = outs.iter().filter(|o| o.converged && o.iterations <= 15).count();
    assert!(quick * 100 >= outs.len() * 99, "{quick}/{}", outs.len());
}

#[test]
fn seven_separated_sources_are_counted() {
    let c = cfg();
    let scene = Scene::with_real_amplitudes(vec![-45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0], &[30.0; 7], 15.0);
    let params = SolverParams {
        noise_variance: Some(scene.noise_variance(&c)),
        ..SolverParams::default()
    };
    let trials = 200;
    let hits = (0..trials)
        .filter(|&seed| {
            let y = synthesize_snapshot(&c, &scene, seed).unwrap().data;
            estimate(&c, &y, &params).unwrap().num_sources() == 7
        })
        .count();
    assert!(hits * 10 >= trials as usize * 9, "{hits}/{trials}");
}

#[test]
fn patch_recovers_hidden_source_noiseless() {
    let c = cfg();
    let angles = vec![-30.0, -20.0, -10.0, 37.0, 45.0];
    let scene = Scene::with_real_amplitudes(angles.clone(), &[30.0; 5], f64::INFINITY);
    let y = synthesize_snapshot(&c, &scene, 0).unwrap().data;
    let est = estimate(&c, &y, &noiseless_params()).unwrap();
    assert!(est.patch_rounds >= 1);
    assert_eq!(est.angles.len(), 5, "{:?}", est.angles);
    for (e, t) in est.angles.iter().zip(&angles) {
        assert!((e - t).abs() < 1e-6, "{:?}", est.angles);
    }
}

#[test]
fn single_precision_pipeline() {
    let c = ArrayConfig::<f32>::default();
    let scene = Scene::with_real_amplitudes(vec![-3.0f32, 9.0], &[30.0, 30.0], f32::INFINITY);
    let y = synthesize_snapshot(&c, &scene, 0).unwrap().data;
    let params = SolverParams {
        epsilon: Some(1e-3),
        ..SolverParams::default()
    };
    let est = estimate(&c, &y, &params).unwrap();
    assert_eq!(est.angles.len(), 2);
    assert!((est.angles[0] + 3.0).abs() < 1e-2 && (est.angles[1] - 9.0).abs() < 1e-2, "{:?}", est.angles);
}
