use proptest::prelude::*;
use rydberg_reservoir::dynamics::{integrate_ode, integrate_sde, relax_to_steady, DriveSchedule, TrajectoryConfig};
use rydberg_reservoir::model::{drift, drift_slope, stationary_states, ModelParams};

fn cfg(dt: f64, seed: u64, n0: f64, spp: usize) -> TrajectoryConfig {
    TrajectoryConfig {
        dt,
        seed,
        stream: 0,
        n0,
        samples_per_symbol: spp,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_stay_in_unit_interval(
        omegas in prop::collection::vec(0.0..3.0f64, 1..8),
        delta in 0.0..30.0f64,
        d in 0.0..2.0f64,
        n0 in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let schedule = DriveSchedule::new(omegas, 5.0, delta).unwrap();
        let p = ModelParams { d, ..ModelParams::default() };
        let c = cfg(0.05, seed, n0, 10);
        for tr in [integrate_ode(&schedule, &p, &c).unwrap(), integrate_sde(&schedule, &p, &c).unwrap()] {
            prop_assert!(tr.n_samples.iter().all(|n| (0.0..=1.0).contains(n)));
        }
    }

    #[test]
    fn deterministic_flow_never_crosses_a_fixed_point(
        omega in 0.5..2.0f64,
        delta in 0.0..25.0f64,
        n0 in 0.0..0.5f64,
    ) {
        let p = ModelParams { omega, delta, d: 0.0, ..ModelParams::default() };
        let schedule = DriveSchedule::constant(omega, 4, 5.0, delta).unwrap();
        let tr = integrate_ode(&schedule, &p, &cfg(0.02, 0, n0, 50)).unwrap();
        let roots: Vec<f64> = stationary_states(&p).unwrap().states.iter().map(|s| s.n_ss).collect();
        let side = |n: f64| roots.iter().filter(|&&r| n > r).count();
        let start_side = side(n0);
        let mut prev = n0;
        for &n in &tr.n_samples {
            // Direction of motion agrees with the drift at the earlier sample.
            let step = n - prev;
            let f = drift(prev, &p);
            if step.abs() > 1e-13 && f.abs() > 1e-13 {
                prop_assert!(step.signum() == f.signum(), "moved {step} against F = {f}");
            }
            if roots.iter().all(|r| (n - r).abs() > 1e-9) {
                prop_assert_eq!(side(n), start_side);
            }
            prev = n;
        }
    }
}

#[test]
fn relax_matches_basins() {
    let p = ModelParams::default()
        .with_omega(1.21)
        .with_delta(11.45)
        .with_noise(0.0);
    let set = stationary_states(&p).unwrap();
    assert_eq!(set.count(), 3);
    let (lo, mid, hi) = (set.states[0].n_ss, set.states[1].n_ss, set.states[2].n_ss);
    let below = relax_to_steady(&p, mid - 1e-3, 1e-12).unwrap();
    let above = relax_to_steady(&p, mid + 1e-3, 1e-12).unwrap();
    assert!((below - lo).abs() < 1e-9, "{below} vs {lo}");
    assert!((above - hi).abs() < 1e-9, "{above} vs {hi}");

    let mono = ModelParams::default().with_delta(5.0);
    let unique = stationary_states(&mono).unwrap().states[0].n_ss;
    assert!((relax_to_steady(&mono, 0.0, 1e-12).unwrap() - unique).abs() < 1e-9);
}

/// Long-run variance of the SDE around the stable state at noise `d`.
fn stationary_variance(d: f64) -> f64 {
    let p = ModelParams::default().with_delta(5.0).with_noise(d);
    let n_ss = stationary_states(&p).unwrap().states[0].n_ss;
    let schedule = DriveSchedule::constant(p.omega, 20_000, 10.0, p.delta).unwrap();
    let tr = integrate_sde(&schedule, &p, &cfg(0.01, 11, n_ss, 10)).unwrap();
    let n = tr.len() as f64;
    let mean = tr.n_samples.iter().sum::<f64>() / n;
    tr.n_samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

#[test]
fn sde_variance_scales_linearly_with_noise() {
    let (d_lo, d_hi) = (1e-6, 1e-5);
    let (v_lo, v_hi) = (stationary_variance(d_lo), stationary_variance(d_hi));
    let slope = (v_hi / v_lo).ln() / (d_hi / d_lo).ln();
    assert!((slope - 1.0).abs() <= 0.2, "log-log slope {slope}");

    // Linear-noise estimate n D / (2 |F'|).
    let p = ModelParams::default().with_delta(5.0);
    let n_ss = stationary_states(&p).unwrap().states[0].n_ss;
    let predicted = n_ss * d_hi / (2.0 * drift_slope(n_ss, &p).abs());
    assert!((v_hi / predicted - 1.0).abs() < 0.2, "{v_hi} vs {predicted}");
}

#[test]
fn ensemble_mean_follows_deterministic_flow() {
    let p = ModelParams::default().with_delta(9.0).with_noise(1e-4);
    let omegas = vec![1.1, 1.21, 1.15, 1.1];
    let schedule = DriveSchedule::new(omegas, 5.0, p.delta).unwrap();
    let ode = integrate_ode(&schedule, &p, &cfg(0.01, 0, 0.02, 5)).unwrap();
    let mut mean = vec![0.0; ode.len()];
    let runs = 1000;
    for seed in 0..runs {
        let tr = integrate_sde(&schedule, &p, &cfg(0.01, seed, 0.02, 5)).unwrap();
        for (m, x) in mean.iter_mut().zip(&tr.n_samples) {
            *m += x / runs as f64;
        }
    }
    for (m, x) in mean.iter().zip(&ode.n_samples) {
        assert!((m - x).abs() < 2e-3, "ensemble {m} vs ode {x}");
    }
}
