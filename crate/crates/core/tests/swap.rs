use std::f64::consts::TAU;

use postsel_core::protocol::{bell_report, TSIRELSON};
use postsel_core::qcore::trace_distance;
use postsel_core::swap::{
    depolarizing_sweep, order_invariance, remote_state_check, run_swap, MeasurementOrder, NoiseParams,
    SwapConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(noise: NoiseParams, order: MeasurementOrder, seed: u64) -> SwapConfig {
    SwapConfig { n_trials: 1_000_000, noise, seed, order }
}

#[test]
fn remote_states_are_basis_independent_for_any_jitter() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (j, jp) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let d =
            trace_distance(&remote_state_check(0, j).unwrap(), &remote_state_check(1, jp).unwrap()).unwrap();
        assert!(d < 1e-12);
    }
}

#[test]
fn measurement_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let zero = cfg(NoiseParams::default(), MeasurementOrder::PartiesFirst, 0);
    assert!(order_invariance(&zero).unwrap() < 1e-12);
    for _ in 0..10 {
        let noise = NoiseParams {
            depol_alice: rng.random(),
            depol_bob: rng.random(),
            jitter_alice: rng.random_range(0.0..1.0),
            jitter_bob: rng.random_range(0.0..1.0),
            charlie_mix: rng.random(),
        };
        let dev = order_invariance(&cfg(noise, MeasurementOrder::CharlieFirst, 0)).unwrap();
        assert!(dev < 1e-12, "deviation {dev:e} for {noise:?}");
    }
}

#[test]
fn zero_noise_swap_reaches_tsirelson_in_both_orders() {
    for (order, seed) in [(MeasurementOrder::PartiesFirst, 31), (MeasurementOrder::CharlieFirst, 32)] {
        let t = run_swap(&cfg(NoiseParams::default(), order, seed)).unwrap();
        let r = bell_report(&t, 500, seed).unwrap();
        let se = r.se_s.value().unwrap();
        assert!((r.s - TSIRELSON).abs() < 5.0 * se, "{order:?}: {} ± {se}", r.s);
        let rate = t.n_selected() as f64 / t.n_total() as f64;
        assert!((rate - 0.25).abs() < 5.0 * (0.25 * 0.75 / 1e6f64).sqrt());
    }
}

#[test]
fn fully_noisy_swaps_lose_the_correlation() {
    let noises =
        [NoiseParams::symmetric_depolarizing(1.0), NoiseParams { charlie_mix: 1.0, ..Default::default() }];
    for (i, noise) in noises.into_iter().enumerate() {
        let t = run_swap(&cfg(noise, MeasurementOrder::PartiesFirst, 40 + i as u64)).unwrap();
        let r = bell_report(&t, 500, 1).unwrap();
        assert!(r.s.abs() < 5.0 * r.se_s.value().unwrap());
    }
}

#[test]
fn depolarizing_sweep_is_monotone() {
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let sweep = depolarizing_sweep(&grid).unwrap();
    assert!((sweep[0].1 - TSIRELSON).abs() < 1e-9);
    assert!(sweep.last().unwrap().1.abs() < 1e-9);
    assert!(sweep.windows(2).all(|w| w[1].1 <= w[0].1));
}
