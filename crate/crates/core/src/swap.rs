//! Remote preparation of the task's states by entanglement swapping.
//!
//! Alice holds `|phi+>` on qubits `(alpha, beta)` and Bob holds one on
//! `(alpha', beta')`. Each measures the local half (`alpha`, `alpha'`) in a
//! basis chosen by their basis bit; the outcome is their state bit and the
//! other half is sent to Charlie, who applies the `|phi+>` selection to
//! `(beta, beta')`. Full state order is `(alpha, beta, alpha', beta')`.
//!
//! Bob's rotated states come from rotated local measurements at his canonical
//! angles. A rotated Bell pair with plain Z/X measurements is available as
//! [`SwapSetup::rotated_pair`]; it reproduces the same four states but with the
//! basis-1 labels exchanged.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    bases_index, canonical_alice, canonical_bob, charlie_projector, outcome_index, CondProbTable,
    SelectionRates, Tally, TrialRecord, BASIS_PAIRS, BASIS_PRIOR, ZERO_MASS,
};
use crate::qcore::{
    clamp_probability, depolarize_qubit_matrix, embed_operator, ket_theta, partial_trace_matrix, phi_plus,
    tensor, Angle, DensityMatrix, Projector, PureState,
};
use crate::rng::par_tally;
use crate::Bit;

const ALPHA: usize = 0;
const BETA: usize = 1;
const ALPHA_PRIME: usize = 2;
const BETA_PRIME: usize = 3;
const N_QUBITS: usize = 4;

/// Imperfections of the swap realization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Depolarizing strength on `beta`.
    pub depol_alice: f64,
    /// Depolarizing strength on `beta'`.
    pub depol_bob: f64,
    /// Angle offset (radians) added to Alice's local measurement states.
    pub jitter_alice: f64,
    pub jitter_bob: f64,
    /// Charlie's effect is `(1 - eps) |phi+><phi+| + eps I/4`.
    pub charlie_mix: f64,
}

impl NoiseParams {
    pub fn symmetric_depolarizing(p: f64) -> Self {
        NoiseParams { depol_alice: p, depol_bob: p, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("depol_alice", self.depol_alice),
            ("depol_bob", self.depol_bob),
            ("charlie_mix", self.charlie_mix),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ParameterOutOfRange { name, value: v });
            }
        }
        for (name, v) in [("jitter_alice", self.jitter_alice), ("jitter_bob", self.jitter_bob)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::ParameterOutOfRange { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementOrder {
    /// Alice and Bob measure before Charlie: the remote-preparation picture.
    #[default]
    PartiesFirst,
    /// Charlie measures first: the entanglement-swapping Bell test picture.
    CharlieFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapConfig {
    pub n_trials: u64,
    pub noise: NoiseParams,
    pub seed: u64,
    pub order: MeasurementOrder,
}

/// Which local measurement angles each party uses, and how much Bob's Bell
/// pair is rotated on `beta'` before anything else happens.
#[derive(Clone, Debug, PartialEq)]
pub struct SwapSetup {
    pub alice_angles: [[Angle; 2]; 2],
    pub bob_angles: [[Angle; 2]; 2],
    pub bob_pair_rotation: f64,
}

impl SwapSetup {
    /// Both parties measure at their canonical preparation angles.
    pub fn canonical() -> Self {
        SwapSetup {
            alice_angles: canonical_alice().angles(),
            bob_angles: canonical_bob().angles(),
            bob_pair_rotation: 0.0,
        }
    }

    /// Bob measures Z/X on `alpha'` of a pair rotated by `pi/4` on `beta'`.
    pub fn rotated_pair() -> Self {
        SwapSetup {
            alice_angles: canonical_alice().angles(),
            bob_angles: canonical_alice().angles(),
            bob_pair_rotation: std::f64::consts::FRAC_PI_4,
        }
    }

    fn initial_state(&self) -> Result<PureState> {
        let bob_pair = if self.bob_pair_rotation == 0.0 {
            phi_plus()
        } else {
            let (c, s) = ((self.bob_pair_rotation / 2.0).cos(), (self.bob_pair_rotation / 2.0).sin());
            let ry = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]).map(|v| Complex64::new(v, 0.0));
            let op = embed_operator(&ry, &[1], 2)?;
            PureState::normalized(op * phi_plus().vector())?
        };
        tensor(&phi_plus(), &bob_pair)
    }
}

/// `|phi+>_(alpha, beta) (x) |phi+>_(alpha', beta')`.
pub fn build_initial() -> PureState {
    tensor(&phi_plus(), &phi_plus()).expect("four qubits")
}

fn projector_pair(angles: [Angle; 2], jitter: f64) -> [Projector; 2] {
    angles.map(|t| Projector::onto(&ket_theta(t.offset(jitter))))
}

/// Alice's local measurement: Z (`|0>, |1>`) for basis 0, X (`|+>, |->`) for
/// basis 1, each rotated by `jitter`. Outcome index is the state bit.
pub fn local_projectors(basis: Bit, jitter: f64) -> [Projector; 2] {
    projector_pair(canonical_alice().angles()[basis as usize], jitter)
}

/// Bob's local measurement at his canonical angles.
pub fn bob_local_projectors(basis: Bit, jitter: f64) -> [Projector; 2] {
    projector_pair(canonical_bob().angles()[basis as usize], jitter)
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Outcome-averaged state of `beta` after Alice measures `alpha` of `|phi+>`.
pub fn remote_state_check(basis: Bit, jitter: f64) -> Result<DensityMatrix> {
    let rho = phi_plus().density();
    let mut avg = DMatrix::from_element(2, 2, c(0.0));
    for p in local_projectors(basis, jitter) {
        let k = embed_operator(p.matrix(), &[0], 2)?;
        let post = &k * rho.matrix() * &k;
        avg += partial_trace_matrix(&post, 2, &[1])?;
    }
    DensityMatrix::from_matrix(avg)
}

/// `p(x, y, c | a, b)` indexed `[2a + b][2x + y][c]`.
pub type JointTable = [[[f64; 2]; 4]; 4];

fn charlie_effect(mix: f64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    let p = charlie_projector().matrix().clone();
    let q = DMatrix::identity(4, 4) - &p;
    let effect = &p * c(1.0 - mix) + DMatrix::identity(4, 4) * c(mix / 4.0);
    // effect has eigenvalue 1 - 3 mix/4 on phi+ and mix/4 elsewhere
    let keep = &p * c((1.0 - 0.75 * mix).sqrt()) + &q * c((0.25 * mix).sqrt());
    let drop = &p * c((0.75 * mix).sqrt()) + &q * c((1.0 - 0.25 * mix).sqrt());
    let embed = |m: &DMatrix<Complex64>| embed_operator(m, &[BETA, BETA_PRIME], N_QUBITS);
    Ok((embed(&effect)?, embed(&keep)?, embed(&drop)?))
}

fn depolarize_both(rho: &DMatrix<Complex64>, noise: &NoiseParams) -> Result<DMatrix<Complex64>> {
    let r = depolarize_qubit_matrix(rho, N_QUBITS, BETA, noise.depol_alice)?;
    depolarize_qubit_matrix(&r, N_QUBITS, BETA_PRIME, noise.depol_bob)
}

fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    m.trace().re
}

/// Exact `p(x, y, c | a, b)` by density-matrix evolution in the given order.
pub fn joint_distribution(
    setup: &SwapSetup,
    noise: &NoiseParams,
    order: MeasurementOrder,
) -> Result<JointTable> {
    noise.validate()?;
    let psi = setup.initial_state()?;
    let rho0 = psi.density().matrix().clone();
    let (effect, keep, drop) = charlie_effect(noise.charlie_mix)?;
    let mut out = [[[0.0; 2]; 4]; 4];
    for &(a, b) in &BASIS_PAIRS {
        let alice = projector_pair(setup.alice_angles[a as usize], noise.jitter_alice);
        let bob = projector_pair(setup.bob_angles[b as usize], noise.jitter_bob);
        let parties = |x: Bit, y: Bit| -> Result<DMatrix<Complex64>> {
            let pa = embed_operator(alice[x as usize].matrix(), &[ALPHA], N_QUBITS)?;
            let pb = embed_operator(bob[y as usize].matrix(), &[ALPHA_PRIME], N_QUBITS)?;
            Ok(pa * pb)
        };
        let row = &mut out[bases_index(a, b)];
        match order {
            MeasurementOrder::PartiesFirst => {
                for x in 0..2 {
                    for y in 0..2 {
                        let k = parties(x, y)?;
                        let conditioned = depolarize_both(&(&k * &rho0 * &k), noise)?;
                        let total = trace_re(&conditioned);
                        let selected = trace_re(&(&effect * &conditioned));
                        row[outcome_index(x, y)] = [total - selected, selected];
                    }
                }
            }
            MeasurementOrder::CharlieFirst => {
                let noisy = depolarize_both(&rho0, noise)?;
                for (cbit, kraus) in [(0usize, &drop), (1usize, &keep)] {
                    let after = kraus * &noisy * kraus.adjoint();
                    for x in 0..2 {
                        for y in 0..2 {
                            let k = parties(x, y)?;
                            row[outcome_index(x, y)][cbit] = trace_re(&(&k * &after * &k));
                        }
                    }
                }
            }
        }
        for cell in row.iter_mut().flatten() {
            *cell = clamp_probability(*cell)?;
        }
    }
    Ok(out)
}

/// Post-selected table and selection rates from a joint distribution.
pub fn postselect(joint: &JointTable) -> Result<(CondProbTable, SelectionRates)> {
    let w = joint.map(|row| row.map(|xy| xy[1]));
    let rates = w.map(|row| row.iter().sum::<f64>());
    Ok((CondProbTable::from_weights_above(w, ZERO_MASS)?, rates))
}

/// Exact post-selected statistics of the canonical swap realization.
pub fn exact_swap(noise: &NoiseParams) -> Result<(CondProbTable, SelectionRates)> {
    postselect(&joint_distribution(&SwapSetup::canonical(), noise, MeasurementOrder::PartiesFirst)?)
}

/// Largest entrywise difference between the two measurement orders.
pub fn order_invariance(cfg: &SwapConfig) -> Result<f64> {
    order_invariance_with(&SwapSetup::canonical(), &cfg.noise)
}

pub fn order_invariance_with(setup: &SwapSetup, noise: &NoiseParams) -> Result<f64> {
    let a = joint_distribution(setup, noise, MeasurementOrder::PartiesFirst)?;
    let b = joint_distribution(setup, noise, MeasurementOrder::CharlieFirst)?;
    let dev = a
        .iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    Ok(dev)
}

/// Exact `S` for symmetric depolarizing strength at each grid point.
pub fn depolarizing_sweep(grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&p| {
            let (table, _) = exact_swap(&NoiseParams::symmetric_depolarizing(p))?;
            Ok((p, table.bell_s()))
        })
        .collect()
}

/// Conditional probabilities for drawing one trial in measurement order.
struct Sampler {
    order: MeasurementOrder,
    // parties-first: P(x=1), P(y=1 | x), P(c=1 | x, y)
    // charlie-first: P(c=1), P(x=1 | c), P(y=1 | c, x)
    first: [f64; 4],
    second: [[f64; 2]; 4],
    third: [[[f64; 2]; 2]; 4],
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

impl Sampler {
    fn new(joint: &JointTable, order: MeasurementOrder) -> Self {
        let mut s = Sampler { order, first: [0.0; 4], second: [[0.0; 2]; 4], third: [[[0.0; 2]; 2]; 4] };
        for (ab, row) in joint.iter().enumerate() {
            // p[x][y][c]
            let p = |x: usize, y: usize, c: usize| row[2 * x + y][c];
            match order {
                MeasurementOrder::PartiesFirst => {
                    let px = |x| p(x, 0, 0) + p(x, 0, 1) + p(x, 1, 0) + p(x, 1, 1);
                    s.first[ab] = ratio(px(1), px(0) + px(1));
                    for x in 0..2 {
                        let pxy = |y| p(x, y, 0) + p(x, y, 1);
                        s.second[ab][x] = ratio(pxy(1), px(x));
                        for y in 0..2 {
                            s.third[ab][x][y] = ratio(p(x, y, 1), pxy(y));
                        }
                    }
                }
                MeasurementOrder::CharlieFirst => {
                    let pc = |c| {
                        (0..2).flat_map(|x| (0..2).map(move |y| (x, y))).map(|(x, y)| p(x, y, c)).sum::<f64>()
                    };
                    s.first[ab] = ratio(pc(1), pc(0) + pc(1));
                    for c in 0..2 {
                        let pcx = |x| p(x, 0, c) + p(x, 1, c);
                        s.second[ab][c] = ratio(pcx(1), pc(c));
                        for x in 0..2 {
                            s.third[ab][c][x] = ratio(p(x, 1, c), pcx(x));
                        }
                    }
                }
            }
        }
        s
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialRecord {
        let a = rng.random_bool(BASIS_PRIOR) as Bit;
        let b = rng.random_bool(BASIS_PRIOR) as Bit;
        let ab = bases_index(a, b);
        let u1 = (rng.random::<f64>() < self.first[ab]) as usize;
        let u2 = (rng.random::<f64>() < self.second[ab][u1]) as usize;
        let u3 = (rng.random::<f64>() < self.third[ab][u1][u2]) as usize;
        let (x, y, c) = match self.order {
            MeasurementOrder::PartiesFirst => (u1, u2, u3),
            MeasurementOrder::CharlieFirst => (u2, u3, u1),
        };
        TrialRecord { a, b, x: x as Bit, y: y as Bit, c: c as Bit }
    }
}

/// Samples the swap experiment trial by trial in the configured order.
pub fn run_swap(cfg: &SwapConfig) -> Result<Tally> {
    run_swap_with(&SwapSetup::canonical(), cfg)
}

pub fn run_swap_with(setup: &SwapSetup, cfg: &SwapConfig) -> Result<Tally> {
    if cfg.n_trials == 0 {
        return Err(Error::NoTrials);
    }
    let joint = joint_distribution(setup, &cfg.noise, cfg.order)?;
    let sampler = Sampler::new(&joint, cfg.order);
    Ok(par_tally(cfg.n_trials, cfg.seed, |rng| sampler.draw(rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{canonical_schemes, exact_postselected, reversed_label_bob, TSIRELSON};
    use crate::qcore::{partial_trace, trace_distance};
    use std::f64::consts::PI;

    fn half() -> DensityMatrix {
        DensityMatrix::maximally_mixed(1).unwrap()
    }

    #[test]
    fn initial_state_amplitudes() {
        let s = build_initial();
        assert!((s.amplitude(0b0000).re - 0.5).abs() < 1e-15);
        assert_eq!(s.amplitude(0b0100).norm(), 0.0);
        let marg = partial_trace(&s.density(), &[BETA, BETA_PRIME]).unwrap();
        assert!(marg.max_entry_diff(&DensityMatrix::maximally_mixed(2).unwrap()) < 1e-15);
    }

    #[test]
    fn local_projector_examples() {
        let z = local_projectors(0, 0.0);
        assert!((z[0].matrix() - Projector::onto(&PureState::zero()).matrix()).norm() < 1e-15);
        assert!((z[1].matrix() - Projector::onto(&PureState::one()).matrix()).norm() < 1e-15);
        let x = local_projectors(1, 0.0);
        assert!((x[0].matrix() - Projector::onto(&PureState::plus()).matrix()).norm() < 1e-15);
        assert!((x[1].matrix() - Projector::onto(&PureState::minus()).matrix()).norm() < 1e-15);
        for j in [0.0, 0.3, 2.1] {
            for basis in 0..2 {
                crate::qcore::check_resolution(&local_projectors(basis, j)).unwrap();
                crate::qcore::check_resolution(&bob_local_projectors(basis, j)).unwrap();
            }
        }
    }

    #[test]
    fn remote_state_examples() {
        assert!(remote_state_check(0, 0.0).unwrap().max_entry_diff(&half()) < 1e-15);
        let r = remote_state_check(1, 0.3).unwrap();
        let d = trace_distance(&r, &remote_state_check(0, 0.0).unwrap()).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn zero_noise_swap_matches_exact_canonical_table() {
        let (want, want_rates) = {
            let (a, b) = canonical_schemes();
            exact_postselected(&a, &b).unwrap()
        };
        let (got, rates) = exact_swap(&NoiseParams::default()).unwrap();
        for (g, w) in got.rows().iter().flatten().zip(want.rows().iter().flatten()) {
            assert!((g - w).abs() < 1e-12);
        }
        for (r, w) in rates.iter().zip(want_rates) {
            assert!((r - w).abs() < 1e-12);
        }
        assert!((got.bell_s() - TSIRELSON).abs() < 1e-12);
    }

    #[test]
    fn rotated_pair_realization_gives_verbatim_labels() {
        let joint = joint_distribution(
            &SwapSetup::rotated_pair(),
            &NoiseParams::default(),
            MeasurementOrder::PartiesFirst,
        )
        .unwrap();
        let (table, _) = postselect(&joint).unwrap();
        let (verbatim, _) = exact_postselected(&canonical_alice(), &reversed_label_bob()).unwrap();
        for (g, w) in table.rows().iter().flatten().zip(verbatim.rows().iter().flatten()) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(table.bell_s().abs() < 1e-12);
    }

    #[test]
    fn sweep_endpoints_and_closed_form() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let sweep = depolarizing_sweep(&grid).unwrap();
        assert!((sweep[0].1 - TSIRELSON).abs() < 1e-9);
        assert!(sweep[10].1.abs() < 1e-9);
        for (p, s) in &sweep {
            // each party's Bloch vector shrinks by (1 - p)
            assert!((s - TSIRELSON * (1.0 - p).powi(2)).abs() < 1e-12);
        }
        for w in sweep.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn order_invariance_zero_noise() {
        let cfg = SwapConfig {
            n_trials: 1,
            noise: NoiseParams::default(),
            seed: 0,
            order: MeasurementOrder::PartiesFirst,
        };
        assert!(order_invariance(&cfg).unwrap() < 1e-12);
    }

    #[test]
    fn full_charlie_mix_selects_uniformly() {
        let noise = NoiseParams { charlie_mix: 1.0, ..Default::default() };
        let (table, rates) = exact_swap(&noise).unwrap();
        assert!(table.bell_s().abs() < 1e-12);
        for r in rates {
            assert!((r - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseParams { depol_alice: 1.5, ..Default::default() }.validate().is_err());
        assert!(NoiseParams { jitter_bob: -0.1, ..Default::default() }.validate().is_err());
        assert!(NoiseParams { charlie_mix: f64::NAN, ..Default::default() }.validate().is_err());
        assert!(NoiseParams { jitter_alice: 2.0 * PI, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn joint_rows_are_distributions() {
        let noise = NoiseParams {
            depol_alice: 0.2,
            depol_bob: 0.5,
            jitter_alice: 0.1,
            jitter_bob: 0.4,
            charlie_mix: 0.3,
        };
        for order in [MeasurementOrder::PartiesFirst, MeasurementOrder::CharlieFirst] {
            let j = joint_distribution(&SwapSetup::canonical(), &noise, order).unwrap();
            for row in j {
                let total: f64 = row.iter().flatten().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn run_swap_rejects_zero_trials() {
        let cfg = SwapConfig {
            n_trials: 0,
            noise: NoiseParams::default(),
            seed: 0,
            order: MeasurementOrder::CharlieFirst,
        };
        assert_eq!(run_swap(&cfg), Err(Error::NoTrials));
    }
}
