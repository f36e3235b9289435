//! The three-party task: Alice and Bob prepare, Charlie selects, and the
//! selected incidents are reduced to `p(x,y|a,b)`, `E(a,b)` and `S`.
//!
//! Tables are indexed `[2a + b][2x + y]`. Outcome bits enter correlations as
//! the signs `1 - 2x` and `1 - 2y`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qcore::{
    born_prob, clamp_probability, ket_theta, mixture_density, phi_plus, tensor, trace_distance, Angle,
    DensityMatrix, Projector, PureState, EXACT_TOL,
};
use crate::rng::par_tally;
use crate::Bit;

/// Probability of either basis value. Fixed by the task.
pub const BASIS_PRIOR: f64 = 0.5;

pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Exact selection mass below this is rounding noise on a zero and makes the
/// `(a, b)` row empty.
pub const ZERO_MASS: f64 = 1e-15;

#[inline]
pub fn bases_index(a: Bit, b: Bit) -> usize {
    debug_assert!(a < 2 && b < 2);
    2 * a as usize + b as usize
}

#[inline]
pub fn outcome_index(x: Bit, y: Bit) -> usize {
    debug_assert!(x < 2 && y < 2);
    2 * x as usize + y as usize
}

/// All four `(a, b)` pairs in table order.
pub const BASIS_PAIRS: [(Bit, Bit); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Sign of the product `(1 - 2x)(1 - 2y)` for outcome index `2x + y`.
const PARITY: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// One party's assignment of a qubit state `|theta>` to each `(basis, state)`
/// pair, with the prior over the state bit within each basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparationScheme {
    angles: [[Angle; 2]; 2],
    priors: [[f64; 2]; 2],
}

impl PreparationScheme {
    pub fn new(angles: [[Angle; 2]; 2], priors: [[f64; 2]; 2]) -> Result<Self> {
        for (basis, row) in priors.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidScheme(format!(
                    "basis {basis} has a negative or non-finite prior"
                )));
            }
            let sum = row[0] + row[1];
            if (sum - 1.0).abs() > EXACT_TOL {
                return Err(Error::InvalidScheme(format!("basis {basis} priors sum to {sum}, not 1")));
            }
        }
        Ok(PreparationScheme { angles, priors })
    }

    /// Uniform state priors.
    pub fn uniform(angles: [[Angle; 2]; 2]) -> Self {
        PreparationScheme { angles, priors: [[0.5; 2]; 2] }
    }

    pub fn angle(&self, basis: Bit, state: Bit) -> Angle {
        self.angles[basis as usize][state as usize]
    }

    pub fn angles(&self) -> [[Angle; 2]; 2] {
        self.angles
    }

    pub fn prior(&self, basis: Bit, state: Bit) -> f64 {
        self.priors[basis as usize][state as usize]
    }

    pub fn priors(&self) -> [[f64; 2]; 2] {
        self.priors
    }

    pub fn state(&self, basis: Bit, state: Bit) -> PureState {
        ket_theta(self.angle(basis, state))
    }

    /// The ensemble prepared for one basis, averaged over the state bit.
    pub fn basis_density(&self, basis: Bit) -> Result<DensityMatrix> {
        mixture_density(&[
            (self.prior(basis, 0), self.state(basis, 0)),
            (self.prior(basis, 1), self.state(basis, 1)),
        ])
    }

    pub fn with_angle(mut self, basis: Bit, state: Bit, angle: Angle) -> Self {
        self.angles[basis as usize][state as usize] = angle;
        self
    }

    /// Exchanges which state bit labels the two preparations of `basis`.
    pub fn with_swapped_labels(mut self, basis: Bit) -> Self {
        self.angles[basis as usize].swap(0, 1);
        self.priors[basis as usize].swap(0, 1);
        self
    }
}

fn pi_angles(k: [[f64; 2]; 2]) -> [[Angle; 2]; 2] {
    k.map(|row| row.map(Angle::pi_times))
}

/// Alice: Z basis `{|0>, |1>}` and X basis `{|+>, |->}`.
pub fn canonical_alice() -> PreparationScheme {
    PreparationScheme::uniform(pi_angles([[0.0, 1.0], [0.5, 1.5]]))
}

/// Bob's states at `pi/4, 5pi/4` (basis 0) and `7pi/4, 3pi/4` (basis 1).
///
/// With the basis-1 labels the other way round (`3pi/4` for `y = 0`) the same
/// four states give `S = 0`; see [`reversed_label_bob`].
pub fn canonical_bob() -> PreparationScheme {
    PreparationScheme::uniform(pi_angles([[0.25, 1.25], [1.75, 0.75]]))
}

/// Bob's scheme with basis-1 labels `(1,0) = 3pi/4`, `(1,1) = 7pi/4`. Kept for
/// comparison; it does not violate the classical bound.
pub fn reversed_label_bob() -> PreparationScheme {
    canonical_bob().with_swapped_labels(1)
}

pub fn canonical_schemes() -> (PreparationScheme, PreparationScheme) {
    (canonical_alice(), canonical_bob())
}

/// Charlie's selecting projector `|phi+><phi+|`.
pub fn charlie_projector() -> Projector {
    Projector::onto(&phi_plus())
}

/// One run of steps (i) and (ii).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub a: Bit,
    pub b: Bit,
    pub x: Bit,
    pub y: Bit,
    pub c: Bit,
}

/// Counts `n(x,y;a,b)` of selected incidents plus the total trial count.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    counts: [[u64; 4]; 4],
    n_total: u64,
    n_selected: u64,
}

impl Tally {
    pub fn from_counts(counts: [[u64; 4]; 4], n_total: u64) -> Result<Self> {
        let n_selected: u64 = counts.iter().flatten().sum();
        if n_selected > n_total {
            return Err(Error::InvalidWeights(format!(
                "selected count {n_selected} exceeds trial count {n_total}"
            )));
        }
        Ok(Tally { counts, n_total, n_selected })
    }

    pub fn record(&mut self, r: &TrialRecord) {
        self.n_total += 1;
        if r.c == 1 {
            self.counts[bases_index(r.a, r.b)][outcome_index(r.x, r.y)] += 1;
            self.n_selected += 1;
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        self.n_total += other.n_total;
        self.n_selected += other.n_selected;
    }

    pub fn count(&self, x: Bit, y: Bit, a: Bit, b: Bit) -> u64 {
        self.counts[bases_index(a, b)][outcome_index(x, y)]
    }

    pub fn counts(&self) -> &[[u64; 4]; 4] {
        &self.counts
    }

    pub fn bases_total(&self, a: Bit, b: Bit) -> u64 {
        self.counts[bases_index(a, b)].iter().sum()
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn n_selected(&self) -> u64 {
        self.n_selected
    }
}

/// `p(x,y|a,b)`; every row sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondProbTable {
    p: [[f64; 4]; 4],
}

impl CondProbTable {
    pub fn from_rows(p: [[f64; 4]; 4]) -> Result<Self> {
        for (i, row) in p.iter().enumerate() {
            let (a, b) = BASIS_PAIRS[i];
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidWeights(format!("row ({a},{b}) has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > EXACT_TOL {
                return Err(Error::InvalidWeights(format!("row ({a},{b}) sums to {sum}")));
            }
        }
        Ok(CondProbTable { p })
    }

    /// Normalizes nonnegative weights row by row. Rows with total mass at or
    /// below `min_mass` are reported as [`Error::EmptyCell`].
    pub fn from_weights(w: [[f64; 4]; 4]) -> Result<Self> {
        Self::from_weights_above(w, 0.0)
    }

    pub(crate) fn from_weights_above(w: [[f64; 4]; 4], min_mass: f64) -> Result<Self> {
        let mut p = [[0.0; 4]; 4];
        for (i, row) in w.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total <= min_mass {
                let (a, b) = BASIS_PAIRS[i];
                return Err(Error::EmptyCell { a, b });
            }
            for (dst, v) in p[i].iter_mut().zip(row) {
                *dst = v / total;
            }
        }
        CondProbTable::from_rows(p)
    }

    pub fn get(&self, x: Bit, y: Bit, a: Bit, b: Bit) -> f64 {
        self.p[bases_index(a, b)][outcome_index(x, y)]
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.p
    }

    /// `[E(0,0), E(0,1), E(1,0), E(1,1)]`.
    pub fn correlations(&self) -> [f64; 4] {
        BASIS_PAIRS.map(|(a, b)| correlation(self, a, b))
    }

    pub fn bell_s(&self) -> f64 {
        let [e00, e01, e10, e11] = self.correlations();
        bell_s(e00, e01, e10, e11)
    }

    /// Alice's marginal `sum_y p(x,y|a,b)`.
    pub fn alice_marginal(&self, x: Bit, a: Bit, b: Bit) -> f64 {
        self.get(x, 0, a, b) + self.get(x, 1, a, b)
    }

    /// Bob's marginal `sum_x p(x,y|a,b)`.
    pub fn bob_marginal(&self, y: Bit, a: Bit, b: Bit) -> f64 {
        self.get(0, y, a, b) + self.get(1, y, a, b)
    }

    /// Largest violation of marginal no-signaling across both parties.
    pub fn signaling_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for v in 0..2 {
            for basis in 0..2 {
                worst =
                    worst.max((self.alice_marginal(v, basis, 0) - self.alice_marginal(v, basis, 1)).abs());
                worst = worst.max((self.bob_marginal(v, 0, basis) - self.bob_marginal(v, 1, basis)).abs());
            }
        }
        worst
    }
}

/// Selection probability for each `(a, b)` in table order.
pub type SelectionRates = [f64; 4];

/// `p(x,y|a,b) = n(x,y;a,b) / sum_{x,y} n(x,y;a,b)`.
pub fn conditional_probs(t: &Tally) -> Result<CondProbTable> {
    let w = t.counts.map(|row| row.map(|c| c as f64));
    CondProbTable::from_weights(w)
}

/// `E(a,b) = p(0,0) + p(1,1) - p(0,1) - p(1,0)`.
pub fn correlation(p: &CondProbTable, a: Bit, b: Bit) -> f64 {
    p.p[bases_index(a, b)].iter().zip(PARITY).map(|(v, s)| v * s).sum()
}

/// `S = E(0,0) + E(0,1) + E(1,0) - E(1,1)`, signed.
pub fn bell_s(e00: f64, e01: f64, e10: f64, e11: f64) -> f64 {
    e00 + e01 + e10 - e11
}

/// Per-`(a,b,x,y)` probability that Charlie announces `c = 1`.
fn selection_table(alice: &PreparationScheme, bob: &PreparationScheme) -> Result<[[f64; 4]; 4]> {
    let proj = charlie_projector();
    let mut sel = [[0.0; 4]; 4];
    for (ab, &(a, b)) in BASIS_PAIRS.iter().enumerate() {
        for x in 0..2 {
            for y in 0..2 {
                let pair = tensor(&alice.state(a, x), &bob.state(b, y))?;
                sel[ab][outcome_index(x, y)] = born_prob(&pair, &proj)?;
            }
        }
    }
    Ok(sel)
}

/// Exact post-selected statistics, no sampling.
///
/// Returns `p(x,y|a,b)` and, per `(a, b)`, the probability that Charlie
/// selects given those bases.
pub fn exact_postselected(
    alice: &PreparationScheme,
    bob: &PreparationScheme,
) -> Result<(CondProbTable, SelectionRates)> {
    let sel = selection_table(alice, bob)?;
    let mut w = [[0.0; 4]; 4];
    let mut rates = [0.0; 4];
    for (ab, &(a, b)) in BASIS_PAIRS.iter().enumerate() {
        for x in 0..2 {
            for y in 0..2 {
                let xy = outcome_index(x, y);
                w[ab][xy] = alice.prior(a, x) * bob.prior(b, y) * sel[ab][xy];
            }
        }
        rates[ab] = clamp_probability(w[ab].iter().sum())?;
    }
    Ok((CondProbTable::from_weights_above(w, ZERO_MASS)?, rates))
}

/// Samples the task with quantum preparations and the `|phi+>` selection.
pub fn run_quantum_mc(
    alice: &PreparationScheme,
    bob: &PreparationScheme,
    n_trials: u64,
    seed: u64,
) -> Result<Tally> {
    if n_trials == 0 {
        return Err(Error::NoTrials);
    }
    let sel = selection_table(alice, bob)?;
    let alice_p1 = [alice.prior(0, 1), alice.prior(1, 1)];
    let bob_p1 = [bob.prior(0, 1), bob.prior(1, 1)];
    Ok(par_tally(n_trials, seed, |rng| {
        let a = rng.random_bool(BASIS_PRIOR) as Bit;
        let b = rng.random_bool(BASIS_PRIOR) as Bit;
        let x = (rng.random::<f64>() < alice_p1[a as usize]) as Bit;
        let y = (rng.random::<f64>() < bob_p1[b as usize]) as Bit;
        let c = (rng.random::<f64>() < sel[bases_index(a, b)][outcome_index(x, y)]) as Bit;
        TrialRecord { a, b, x, y, c }
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCheck {
    pub distance: f64,
    pub pass: bool,
}

/// Trace distance between the basis-0 and basis-1 ensembles of one party.
pub fn check_basis_independence(scheme: &PreparationScheme, tol: f64) -> Result<IndependenceCheck> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::ParameterOutOfRange { name: "tolerance", value: tol });
    }
    let distance = trace_distance(&scheme.basis_density(0)?, &scheme.basis_density(1)?)?;
    Ok(IndependenceCheck { distance, pass: distance <= tol })
}

/// A bootstrap standard error, or the marker that none was requested.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StdErr {
    Value(f64),
    NotComputed,
}

impl StdErr {
    pub const NOT_COMPUTED: &'static str = "not computed";

    pub fn value(self) -> Option<f64> {
        match self {
            StdErr::Value(v) => Some(v),
            StdErr::NotComputed => None,
        }
    }
}

impl Serialize for StdErr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StdErr::Value(v) => s.serialize_f64(*v),
            StdErr::NotComputed => s.serialize_str(Self::NOT_COMPUTED),
        }
    }
}

impl<'de> Deserialize<'de> for StdErr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(StdErr::Value(v)),
            Repr::Text(t) if t == Self::NOT_COMPUTED => Ok(StdErr::NotComputed),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected standard error {t:?}"))),
        }
    }
}

/// Correlations, Bell value and bootstrap standard errors for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    pub e: [f64; 4],
    pub s: f64,
    pub se_e: [StdErr; 4],
    pub se_s: StdErr,
    pub n_total: u64,
    pub n_selected: u64,
}

impl BellReport {
    /// Report for an exact table: no trials and no error bars.
    pub fn exact(table: &CondProbTable) -> Self {
        let e = table.correlations();
        BellReport {
            e,
            s: bell_s(e[0], e[1], e[2], e[3]),
            se_e: [StdErr::NotComputed; 4],
            se_s: StdErr::NotComputed,
            n_total: 0,
            n_selected: 0,
        }
    }
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64; 4], rng: &mut R) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut remaining = n;
    let mut mass = 1.0;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let p = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, p).expect("p clamped to [0, 1]").sample(rng);
        out[k] = draw;
        remaining -= draw;
        mass -= probs[k];
    }
    out[3] = remaining;
    out
}

fn std_dev(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1.0).max(1.0)).sqrt()
}

/// Correlations and `S` from a tally, with standard errors from `resamples`
/// multinomial bootstrap replicates of each `(a, b)` row.
pub fn bell_report(t: &Tally, resamples: usize, seed: u64) -> Result<BellReport> {
    let table = conditional_probs(t)?;
    let e = table.correlations();
    let s = bell_s(e[0], e[1], e[2], e[3]);
    let (se_e, se_s) = if resamples == 0 {
        ([StdErr::NotComputed; 4], StdErr::NotComputed)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e_samples: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(resamples)).collect();
        let mut s_samples = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            let mut eb = [0.0; 4];
            for (ab, row) in table.rows().iter().enumerate() {
                let n = t.counts[ab].iter().sum::<u64>();
                let draw = multinomial(n, row, &mut rng);
                let signed: f64 = draw.iter().zip(PARITY).map(|(&c, s)| c as f64 * s).sum();
                eb[ab] = signed / n as f64;
                e_samples[ab].push(eb[ab]);
            }
            s_samples.push(bell_s(eb[0], eb[1], eb[2], eb[3]));
        }
        ([0, 1, 2, 3].map(|ab| StdErr::Value(std_dev(&e_samples[ab]))), StdErr::Value(std_dev(&s_samples)))
    };
    Ok(BellReport { e, s, se_e, se_s, n_total: t.n_total, n_selected: t.n_selected })
}

/// `2 sqrt(2)`, the value reached by the canonical schemes.
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Half-angle identity used by the selection rule: the `|phi+>` probability for
/// `|theta_a> (x) |theta_b>` is `cos^2((theta_b - theta_a)/2) / 2`.
pub fn phi_plus_overlap(theta_a: Angle, theta_b: Angle) -> f64 {
    let delta = theta_b.radians() - theta_a.radians();
    0.5 * (delta / 2.0).cos().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, PI};

    fn tally(rows: [[u64; 4]; 4]) -> Tally {
        let n = rows.iter().flatten().sum();
        Tally::from_counts(rows, n).unwrap()
    }

    #[test]
    fn canonical_angles() {
        let (alice, bob) = canonical_schemes();
        assert_eq!(alice.angle(0, 0).radians(), 0.0);
        assert_eq!(alice.angle(0, 1).radians(), PI);
        assert_eq!(bob.angle(0, 0).radians(), PI / 4.0);
        for a in 0..2 {
            for x in 0..2 {
                assert_eq!(alice.prior(a, x), 0.5);
                assert_eq!(bob.prior(a, x), 0.5);
            }
        }
    }

    #[test]
    fn scheme_rejects_unnormalized_priors() {
        let angles = canonical_alice().angles();
        assert!(PreparationScheme::new(angles, [[0.7, 0.2], [0.5, 0.5]]).is_err());
        assert!(PreparationScheme::new(angles, [[1.2, -0.2], [0.5, 0.5]]).is_err());
        assert!(PreparationScheme::new(angles, [[1.0, 0.0], [0.25, 0.75]]).is_ok());
    }

    #[test]
    fn conditional_probs_examples() {
        let t = tally([[5; 4]; 4]);
        let p = conditional_probs(&t).unwrap();
        for row in p.rows() {
            for v in row {
                assert_eq!(*v, 0.25);
            }
        }
        let mut rows = [[1; 4]; 4];
        rows[0] = [3, 0, 0, 1];
        let p = conditional_probs(&tally(rows)).unwrap();
        assert_eq!(p.get(0, 0, 0, 0), 0.75);
        let mut rows = [[1; 4]; 4];
        rows[3] = [0; 4];
        assert_eq!(conditional_probs(&tally(rows)), Err(Error::EmptyCell { a: 1, b: 1 }));
    }

    #[test]
    fn tally_rejects_more_selected_than_trials() {
        assert!(Tally::from_counts([[1; 4]; 4], 15).is_err());
    }

    #[test]
    fn correlation_examples() {
        let perfect = CondProbTable::from_rows([[0.5, 0.0, 0.0, 0.5]; 4]).unwrap();
        assert_eq!(correlation(&perfect, 0, 1), 1.0);
        let uniform = CondProbTable::from_rows([[0.25; 4]; 4]).unwrap();
        assert_eq!(correlation(&uniform, 1, 1), 0.0);
        // cos^2(pi/8), sin^2(pi/8), sin^2(pi/8), cos^2(pi/8), halved
        let c = FRAC_PI_8.cos().powi(2) / 2.0;
        let s = FRAC_PI_8.sin().powi(2) / 2.0;
        let (table, _) = exact_postselected(&canonical_alice(), &canonical_bob()).unwrap();
        let want = [c, s, s, c];
        for (got, w) in table.rows()[0].iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
        assert!((correlation(&table, 0, 0) - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bell_s_examples() {
        assert_eq!(bell_s(1.0, 1.0, 1.0, -1.0), 4.0);
        let r = FRAC_1_SQRT_2;
        assert!((bell_s(r, r, r, -r) - TSIRELSON).abs() < 1e-15);
        assert_eq!(bell_s(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(bell_s(0.5, 0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn exact_canonical_table() {
        let (table, rates) = exact_postselected(&canonical_alice(), &canonical_bob()).unwrap();
        assert!((table.get(0, 0, 0, 0) - 0.426_776_695_296_636_9).abs() < 1e-12);
        for r in rates {
            assert!((r - 0.25).abs() < 1e-12);
        }
        assert!((table.bell_s() - TSIRELSON).abs() < 1e-12);
    }

    #[test]
    fn exact_always_zero_scheme() {
        let zero = PreparationScheme::new([[Angle::new(0.0); 2]; 2], [[1.0, 0.0]; 2]).unwrap();
        let (table, rates) = exact_postselected(&zero, &zero).unwrap();
        for (a, b) in BASIS_PAIRS {
            assert_eq!(table.get(0, 0, a, b), 1.0);
        }
        for r in rates {
            assert!((r - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_degenerate_scheme_is_empty_cell() {
        // Alice always |0>, Bob always |1>: phi+ never fires.
        let zero = PreparationScheme::new([[Angle::new(0.0); 2]; 2], [[1.0, 0.0]; 2]).unwrap();
        let one = PreparationScheme::new([[Angle::new(PI); 2]; 2], [[1.0, 0.0]; 2]).unwrap();
        assert!(matches!(exact_postselected(&zero, &one), Err(Error::EmptyCell { .. })));
    }

    #[test]
    fn selection_matches_half_angle_identity() {
        let (alice, bob) = canonical_schemes();
        let sel = selection_table(&alice, &bob).unwrap();
        for (ab, &(a, b)) in BASIS_PAIRS.iter().enumerate() {
            for x in 0..2 {
                for y in 0..2 {
                    let want = phi_plus_overlap(alice.angle(a, x), bob.angle(b, y));
                    assert!((sel[ab][outcome_index(x, y)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mc_rejects_zero_trials_and_handles_one() {
        let (a, b) = canonical_schemes();
        assert_eq!(run_quantum_mc(&a, &b, 0, 1), Err(Error::NoTrials));
        let t = run_quantum_mc(&a, &b, 1, 1).unwrap();
        assert_eq!(t.n_total(), 1);
        assert!(t.n_selected() <= 1);
    }

    #[test]
    fn mc_single_preparation_only_tallies_00() {
        let zero = PreparationScheme::new([[Angle::new(0.0); 2]; 2], [[1.0, 0.0]; 2]).unwrap();
        let t = run_quantum_mc(&zero, &zero, 20_000, 9).unwrap();
        assert!(t.n_selected() > 0);
        for (a, b) in BASIS_PAIRS {
            assert_eq!(t.count(0, 0, a, b), t.bases_total(a, b));
        }
    }

    #[test]
    fn basis_independence_examples() {
        let alice = check_basis_independence(&canonical_alice(), 1e-12).unwrap();
        assert!(alice.distance < 1e-12 && alice.pass);
        let bob = check_basis_independence(&canonical_bob(), 1e-12).unwrap();
        assert!(bob.distance < 1e-12 && bob.pass);
        let shifted = canonical_alice().with_angle(1, 0, Angle::new(PI / 2.0 + 0.2));
        let r = check_basis_independence(&shifted, 1e-6).unwrap();
        // Bloch-vector oracle: half the length of the average of the shifted pair.
        let oracle = 0.5 * 0.1f64.sin();
        assert!((r.distance - oracle).abs() < 1e-12);
        assert!(r.distance > 0.01 && !r.pass);
        assert!(check_basis_independence(&canonical_alice(), 0.0).is_err());
    }

    #[test]
    fn bootstrap_zero_resamples_is_not_computed() {
        let t = tally([[10, 2, 3, 9]; 4]);
        let r = bell_report(&t, 0, 1).unwrap();
        assert_eq!(r.se_s, StdErr::NotComputed);
        assert!(r.se_e.iter().all(|s| *s == StdErr::NotComputed));
        let json = serde_json::to_string(&r.se_s).unwrap();
        assert_eq!(json, "\"not computed\"");
        let back: StdErr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, StdErr::NotComputed);
        let v: StdErr = serde_json::from_str("0.125").unwrap();
        assert_eq!(v, StdErr::Value(0.125));
        assert!(serde_json::from_str::<StdErr>("\"nope\"").is_err());
    }

    #[test]
    fn bootstrap_point_mass_has_zero_error() {
        let t = tally([[40, 0, 0, 0], [0, 17, 0, 0], [0, 0, 0, 3], [0, 0, 8, 0]]);
        let r = bell_report(&t, 200, 4).unwrap();
        assert_eq!(r.se_s, StdErr::Value(0.0));
        assert_eq!(r.s, 1.0 - 1.0 + 1.0 + 1.0);
    }

    #[test]
    fn bootstrap_error_is_positive_for_mixed_tally() {
        let t = tally([[10, 2, 3, 9]; 4]);
        let r = bell_report(&t, 100, 4).unwrap();
        assert!(r.se_s.value().unwrap() > 0.0);
        assert_eq!(bell_report(&t, 100, 4).unwrap(), r);
    }

    #[test]
    fn bootstrap_scaled_exact_table() {
        let (table, _) = exact_postselected(&canonical_alice(), &canonical_bob()).unwrap();
        let per_row = 250_000.0;
        let counts = table.rows().map(|row| row.map(|p| (p * per_row).round() as u64));
        let t = tally(counts);
        let r = bell_report(&t, 500, 11).unwrap();
        let se = r.se_s.value().unwrap();
        assert!((r.s - TSIRELSON).abs() < 5.0 * se, "S = {} se = {se}", r.s);
        // binomial oracle: var E = (1 - E^2) / n per row, four independent rows
        let analytic = (4.0 * 0.5 / per_row).sqrt();
        assert!((se / analytic - 1.0).abs() < 0.15, "se {se} vs analytic {analytic}");
    }

    #[test]
    fn bell_report_propagates_empty_cell() {
        let mut rows = [[1; 4]; 4];
        rows[2] = [0; 4];
        assert_eq!(bell_report(&tally(rows), 10, 0), Err(Error::EmptyCell { a: 1, b: 0 }));
    }
}
