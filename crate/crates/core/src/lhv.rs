//! Classical (local hidden-variable) resources.
//!
//! A hidden value `lambda` fixes Alice's state for each basis, so the pair
//! `(i, j)` names the state she would have sent under basis 0 and basis 1.
//! Likewise `(k, l)` for Bob. Selected pairs `lambda (x) lambda'` therefore
//! fall into 16 cells `(i, j, k, l)`, and `S` is linear in the cell weights
//! with coefficients of magnitude 2.
//!
//! With the extra state value 2 (discarded by the parties after selection)
//! there are 81 cells, and the post-discard `S` can reach 4.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    bases_index, bell_s, outcome_index, CondProbTable, SelectionRates, Tally, TrialRecord, BASIS_PAIRS,
    BASIS_PRIOR, ZERO_MASS,
};
use crate::qcore::EXACT_TOL;
use crate::rng::par_tally;
use crate::Bit;

/// A cell `(i, j, k, l)`: Alice's state under bases 0 and 1, then Bob's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub i: u8,
    pub j: u8,
    pub k: u8,
    pub l: u8,
}

impl Cell {
    pub const fn new(i: u8, j: u8, k: u8, l: u8) -> Self {
        Cell { i, j, k, l }
    }

    /// `8i + 4j + 2k + l`; only meaningful for binary cells.
    pub fn binary_index(self) -> usize {
        debug_assert!(self.is_binary());
        8 * self.i as usize + 4 * self.j as usize + 2 * self.k as usize + self.l as usize
    }

    pub fn from_binary_index(idx: usize) -> Self {
        assert!(idx < 16);
        Cell::new((idx >> 3) as u8 & 1, (idx >> 2) as u8 & 1, (idx >> 1) as u8 & 1, idx as u8 & 1)
    }

    /// `27i + 9j + 3k + l`.
    pub fn trit_index(self) -> usize {
        27 * self.i as usize + 9 * self.j as usize + 3 * self.k as usize + self.l as usize
    }

    pub fn from_trit_index(idx: usize) -> Self {
        assert!(idx < 81);
        Cell::new((idx / 27) as u8, (idx / 9 % 3) as u8, (idx / 3 % 3) as u8, (idx % 3) as u8)
    }

    pub fn is_binary(self) -> bool {
        self.i < 2 && self.j < 2 && self.k < 2 && self.l < 2
    }

    /// Alice's effective state for basis `a`.
    pub fn alice_state(self, a: Bit) -> u8 {
        if a == 0 {
            self.i
        } else {
            self.j
        }
    }

    /// Bob's effective state for basis `b`.
    pub fn bob_state(self, b: Bit) -> u8 {
        if b == 0 {
            self.k
        } else {
            self.l
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{};{}{}", self.i, self.j, self.k, self.l)
    }
}

impl std::str::FromStr for Cell {
    type Err = Error;

    /// Parses the `ij;kl` form, each digit 0, 1 or 2.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidWeights(format!("cell label {s:?} is not of the form ij;kl"));
        let (alice, bob) = s.split_once(';').ok_or_else(bad)?;
        let digits: Vec<u8> = alice
            .chars()
            .chain(bob.chars())
            .map(|ch| ch.to_digit(3).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        if alice.len() != 2 || digits.len() != 4 {
            return Err(bad());
        }
        Ok(Cell::new(digits[0], digits[1], digits[2], digits[3]))
    }
}

#[inline]
fn sign(bit: u8) -> i32 {
    1 - 2 * bit as i32
}

/// `s_i (s_k + s_l) + s_j (s_k - s_l)` with `s_v = 1 - 2v`.
pub fn coefficient(i: Bit, j: Bit, k: Bit, l: Bit) -> i32 {
    let (si, sj, sk, sl) = (sign(i), sign(j), sign(k), sign(l));
    si * (sk + sl) + sj * (sk - sl)
}

fn check_weights(w: &[f64]) -> Result<()> {
    if let Some((idx, v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidWeights(format!("weight {idx} is {v}")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > EXACT_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Normalized selected-incident frequencies over the 16 binary cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CellWeights {
    w: [f64; 16],
}

impl CellWeights {
    pub fn new(w: [f64; 16]) -> Result<Self> {
        check_weights(&w)?;
        Ok(CellWeights { w })
    }

    pub fn point_mass(cell: Cell) -> Self {
        let mut w = [0.0; 16];
        w[cell.binary_index()] = 1.0;
        CellWeights { w }
    }

    pub fn uniform() -> Self {
        CellWeights { w: [1.0 / 16.0; 16] }
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.w[cell.binary_index()]
    }

    pub fn weights(&self) -> &[f64; 16] {
        &self.w
    }
}

impl TryFrom<Vec<f64>> for CellWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let w: [f64; 16] = v.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidWeights(format!("expected 16 cell weights, got {}", v.len()))
        })?;
        CellWeights::new(w)
    }
}

impl From<CellWeights> for Vec<f64> {
    fn from(c: CellWeights) -> Self {
        c.w.to_vec()
    }
}

/// Flat Dirichlet sample over the 16 cells.
pub fn random_cell_weights<R: Rng + ?Sized>(rng: &mut R) -> CellWeights {
    let mut w = [0.0; 16];
    for v in w.iter_mut() {
        *v = Exp1.sample(rng);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    CellWeights { w }
}

/// `S = sum coefficient(i,j,k,l) * w(i,j,k,l)`.
pub fn s_from_cells(w: &CellWeights) -> f64 {
    w.w.iter()
        .enumerate()
        .map(|(idx, v)| {
            let c = Cell::from_binary_index(idx);
            coefficient(c.i, c.j, c.k, c.l) as f64 * v
        })
        .sum()
}

/// Maximum `|S|` over the 16 deterministic strategies, with the lowest-index
/// maximizer as witness.
pub fn max_abs_s_deterministic() -> (f64, Cell) {
    let mut best = (f64::NEG_INFINITY, Cell::from_binary_index(0));
    for idx in 0..16 {
        let cell = Cell::from_binary_index(idx);
        let s = s_from_cells(&CellWeights::point_mass(cell)).abs();
        if s > best.0 {
            best = (s, cell);
        }
    }
    best
}

/// One atom of a discretized hidden-variable measure with its average
/// outcome signs `f(a) = E[1 - 2x | a]` and `g(b) = E[1 - 2y | b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseAtom {
    pub weight: f64,
    pub f0: f64,
    pub f1: f64,
    pub g0: f64,
    pub g1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ResponseAtom>", into = "Vec<ResponseAtom>")]
pub struct ResponseModel {
    atoms: Vec<ResponseAtom>,
}

impl ResponseModel {
    pub fn new(atoms: Vec<ResponseAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidModel("response model has no atoms".into()));
        }
        for (n, a) in atoms.iter().enumerate() {
            if [a.f0, a.f1, a.g0, a.g1].iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(Error::InvalidModel(format!("atom {n} has a response outside [-1, 1]")));
            }
        }
        let w: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        check_weights(&w)?;
        Ok(ResponseModel { atoms })
    }

    pub fn atoms(&self) -> &[ResponseAtom] {
        &self.atoms
    }
}

impl TryFrom<Vec<ResponseAtom>> for ResponseModel {
    type Error = Error;

    fn try_from(atoms: Vec<ResponseAtom>) -> Result<Self> {
        ResponseModel::new(atoms)
    }
}

impl From<ResponseModel> for Vec<ResponseAtom> {
    fn from(m: ResponseModel) -> Self {
        m.atoms
    }
}

pub fn random_response_model<R: Rng + ?Sized>(rng: &mut R, n_atoms: usize) -> ResponseModel {
    let raw: Vec<f64> = (0..n_atoms.max(1)).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let atoms = raw
        .into_iter()
        .map(|w| ResponseAtom {
            weight: w / total,
            f0: rng.random_range(-1.0..=1.0),
            f1: rng.random_range(-1.0..=1.0),
            g0: rng.random_range(-1.0..=1.0),
            g1: rng.random_range(-1.0..=1.0),
        })
        .collect();
    ResponseModel { atoms }
}

/// `sum weight * [f0 (g0 + g1) + f1 (g0 - g1)]`.
pub fn s_indeterministic(m: &ResponseModel) -> f64 {
    m.atoms.iter().map(|a| a.weight * (a.f0 * (a.g0 + a.g1) + a.f1 * (a.g0 - a.g1))).sum()
}

/// A point of hidden-variable support and its probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenValue {
    pub value: f64,
    pub prob: f64,
}

/// Generative classical model of the task.
///
/// `response_a[n][a]` is the probability that Alice's state is `x = 1` given
/// basis `a` and hidden value `lambda[n]`; `response_b` is the same for Bob.
/// `select[n][m]` is the probability that Charlie announces `c = 1` for
/// `(lambda[n], lambda'[m])`; it cannot see the bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhvSimModel {
    lambda: Vec<HiddenValue>,
    lambda_prime: Vec<HiddenValue>,
    response_a: Vec<[f64; 2]>,
    response_b: Vec<[f64; 2]>,
    select: Vec<Vec<f64>>,
}

fn check_distribution(name: &str, d: &[HiddenValue]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::InvalidModel(format!("{name} is empty")));
    }
    if let Some(h) = d.iter().find(|h| !(0.0..=1.0).contains(&h.value)) {
        return Err(Error::InvalidModel(format!("{name} value {} outside [0, 1]", h.value)));
    }
    let probs: Vec<f64> = d.iter().map(|h| h.prob).collect();
    check_weights(&probs).map_err(|e| Error::InvalidModel(format!("{name}: {e}")))
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} probability {v} outside [0, 1]")))
    }
}

impl LhvSimModel {
    pub fn new(
        lambda: Vec<HiddenValue>,
        lambda_prime: Vec<HiddenValue>,
        response_a: Vec<[f64; 2]>,
        response_b: Vec<[f64; 2]>,
        select: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_distribution("lambda", &lambda)?;
        check_distribution("lambda_prime", &lambda_prime)?;
        if response_a.len() != lambda.len() || response_b.len() != lambda_prime.len() {
            return Err(Error::InvalidModel("one response row per hidden value is required".into()));
        }
        if select.len() != lambda.len() || select.iter().any(|r| r.len() != lambda_prime.len()) {
            return Err(Error::InvalidModel("select must be |lambda| x |lambda'|".into()));
        }
        for &v in response_a.iter().chain(&response_b).flatten() {
            check_unit("response", v)?;
        }
        for &v in select.iter().flatten() {
            check_unit("select", v)?;
        }
        Ok(LhvSimModel { lambda, lambda_prime, response_a, response_b, select })
    }

    /// One hidden value per binary cell label on each side, with deterministic
    /// responses and the given selection matrix.
    pub fn deterministic(
        alice: &[(f64, [Bit; 2])],
        bob: &[(f64, [Bit; 2])],
        select: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let spread = |n: usize, i: usize| if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
        let lambda = alice
            .iter()
            .enumerate()
            .map(|(i, (p, _))| HiddenValue { value: spread(alice.len(), i), prob: *p })
            .collect();
        let lambda_prime = bob
            .iter()
            .enumerate()
            .map(|(i, (p, _))| HiddenValue { value: spread(bob.len(), i), prob: *p })
            .collect();
        let resp =
            |v: &[(f64, [Bit; 2])]| v.iter().map(|(_, s)| [s[0] as f64, s[1] as f64]).collect::<Vec<_>>();
        LhvSimModel::new(lambda, lambda_prime, resp(alice), resp(bob), select)
    }

    pub fn lambda(&self) -> &[HiddenValue] {
        &self.lambda
    }

    pub fn lambda_prime(&self) -> &[HiddenValue] {
        &self.lambda_prime
    }

    pub fn response_a(&self) -> &[[f64; 2]] {
        &self.response_a
    }

    pub fn response_b(&self) -> &[[f64; 2]] {
        &self.response_b
    }

    pub fn select(&self) -> &[Vec<f64>] {
        &self.select
    }

    /// Probability mass of selected pairs, `sum P(l) P'(l') select(l, l')`.
    pub fn selected_mass(&self) -> f64 {
        self.pair_weights().map(|(_, _, w)| w).sum()
    }

    fn pair_weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.lambda.iter().enumerate().flat_map(move |(n, h)| {
            self.lambda_prime
                .iter()
                .enumerate()
                .map(move |(m, hp)| (n, m, h.prob * hp.prob * self.select[n][m]))
        })
    }

    /// The model as a response-atom measure over selected pairs.
    pub fn response_model(&self) -> Result<ResponseModel> {
        let total = self.selected_mass();
        if total <= 0.0 {
            return Err(Error::ZeroSelection);
        }
        let atoms = self
            .pair_weights()
            .filter(|(_, _, w)| *w > 0.0)
            .map(|(n, m, w)| ResponseAtom {
                weight: w / total,
                f0: 1.0 - 2.0 * self.response_a[n][0],
                f1: 1.0 - 2.0 * self.response_a[n][1],
                g0: 1.0 - 2.0 * self.response_b[m][0],
                g1: 1.0 - 2.0 * self.response_b[m][1],
            })
            .collect::<Vec<_>>();
        // renormalize away rounding in the division above
        let sum: f64 = atoms.iter().map(|a| a.weight).sum();
        ResponseModel::new(atoms.into_iter().map(|a| ResponseAtom { weight: a.weight / sum, ..a }).collect())
    }

    /// Exact post-selected table and per-basis selection rates.
    pub fn exact_table(&self) -> Result<(CondProbTable, SelectionRates)> {
        let mut w = [[0.0; 4]; 4];
        for (n, m, pw) in self.pair_weights() {
            for (ab, &(a, b)) in BASIS_PAIRS.iter().enumerate() {
                let px1 = self.response_a[n][a as usize];
                let py1 = self.response_b[m][b as usize];
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        let px = if x == 1 { px1 } else { 1.0 - px1 };
                        let py = if y == 1 { py1 } else { 1.0 - py1 };
                        w[ab][outcome_index(x, y)] += pw * px * py;
                    }
                }
            }
        }
        let rates = w.map(|row| row.iter().sum::<f64>());
        if rates.iter().all(|r| *r <= 0.0) {
            return Err(Error::ZeroSelection);
        }
        Ok((CondProbTable::from_weights_above(w, ZERO_MASS)?, rates))
    }
}

fn sample_index<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

fn cumulative(d: &[HiddenValue]) -> Vec<f64> {
    d.iter()
        .scan(0.0, |acc, h| {
            *acc += h.prob;
            Some(*acc)
        })
        .collect()
}

/// Samples the task with classical entities.
pub fn simulate_lhv(m: &LhvSimModel, n_trials: u64, seed: u64) -> Result<Tally> {
    if n_trials == 0 {
        return Err(Error::NoTrials);
    }
    let cum_a = cumulative(&m.lambda);
    let cum_b = cumulative(&m.lambda_prime);
    Ok(par_tally(n_trials, seed, |rng| {
        let a = rng.random_bool(BASIS_PRIOR) as Bit;
        let b = rng.random_bool(BASIS_PRIOR) as Bit;
        let n = sample_index(&cum_a, rng);
        let k = sample_index(&cum_b, rng);
        let x = (rng.random::<f64>() < m.response_a[n][a as usize]) as Bit;
        let y = (rng.random::<f64>() < m.response_b[k][b as usize]) as Bit;
        let c = (rng.random::<f64>() < m.select[n][k]) as Bit;
        TrialRecord { a, b, x, y, c }
    }))
}

fn point_mass_bit(p: f64, lambda: usize) -> Result<Bit> {
    if p == 0.0 {
        Ok(0)
    } else if p == 1.0 {
        Ok(1)
    } else {
        Err(Error::NondeterministicModel(lambda))
    }
}

/// Classifies the selected `(lambda, lambda')` mass into the 16 cells.
pub fn cells_from_model(m: &LhvSimModel) -> Result<CellWeights> {
    let alice = m
        .response_a
        .iter()
        .enumerate()
        .map(|(n, r)| Ok([point_mass_bit(r[0], n)?, point_mass_bit(r[1], n)?]))
        .collect::<Result<Vec<_>>>()?;
    let bob = m
        .response_b
        .iter()
        .enumerate()
        .map(|(n, r)| Ok([point_mass_bit(r[0], n)?, point_mass_bit(r[1], n)?]))
        .collect::<Result<Vec<_>>>()?;
    let mut w = [0.0; 16];
    for (n, k, pw) in m.pair_weights() {
        let cell = Cell::new(alice[n][0], alice[n][1], bob[k][0], bob[k][1]);
        w[cell.binary_index()] += pw;
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroSelection);
    }
    w.iter_mut().for_each(|v| *v /= total);
    CellWeights::new(w)
}

/// Weights over the 81 cells with state values `{0, 1, 2}`; value 2 marks an
/// incident the party discards after selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TritCellWeights {
    w: Vec<f64>,
}

impl TritCellWeights {
    pub const LEN: usize = 81;

    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() != Self::LEN {
            return Err(Error::InvalidWeights(format!(
                "expected {} cell weights, got {}",
                Self::LEN,
                w.len()
            )));
        }
        check_weights(&w)?;
        Ok(TritCellWeights { w })
    }

    /// Builds weights from `(cell, weight)` pairs; unlisted cells get zero.
    pub fn from_cells(cells: &[(Cell, f64)]) -> Result<Self> {
        let mut w = vec![0.0; Self::LEN];
        for (c, v) in cells {
            if c.i > 2 || c.j > 2 || c.k > 2 || c.l > 2 {
                return Err(Error::InvalidWeights(format!("cell {c} has a value above 2")));
            }
            w[c.trit_index()] += v;
        }
        TritCellWeights::new(w)
    }

    pub fn uniform() -> Self {
        TritCellWeights { w: vec![1.0 / Self::LEN as f64; Self::LEN] }
    }

    /// Embeds binary cell weights (no discards).
    pub fn from_binary(c: &CellWeights) -> Self {
        let mut w = vec![0.0; Self::LEN];
        for (idx, v) in c.w.iter().enumerate() {
            w[Cell::from_binary_index(idx).trit_index()] = *v;
        }
        TritCellWeights { w }
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.w[cell.trit_index()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }
}

impl TryFrom<Vec<f64>> for TritCellWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        TritCellWeights::new(v)
    }
}

impl From<TritCellWeights> for Vec<f64> {
    fn from(t: TritCellWeights) -> Self {
        t.w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscardOutcome {
    pub e: [f64; 4],
    pub s: f64,
    /// Fraction of the selected weight that survives both parties' discards, per `(a, b)`.
    pub retained: [f64; 4],
}

/// `S` after each party drops incidents whose effective state is 2.
pub fn s_with_discards(w: &TritCellWeights) -> Result<DiscardOutcome> {
    let mut e = [0.0; 4];
    let mut retained = [0.0; 4];
    for &(a, b) in &BASIS_PAIRS {
        let ab = bases_index(a, b);
        let mut kept = 0.0;
        let mut signed = 0.0;
        for (idx, v) in w.w.iter().enumerate() {
            let cell = Cell::from_trit_index(idx);
            let (x, y) = (cell.alice_state(a), cell.bob_state(b));
            if x == 2 || y == 2 || *v == 0.0 {
                continue;
            }
            kept += v;
            signed += (sign(x) * sign(y)) as f64 * v;
        }
        if kept <= 0.0 {
            return Err(Error::AllDiscarded { a, b });
        }
        retained[ab] = kept;
        e[ab] = signed / kept;
    }
    let s = bell_s(e[0], e[1], e[2], e[3]);
    Ok(DiscardOutcome { e, s, retained })
}

/// Weight 1/4 on each of `02;02`, `02;20`, `20;02` and `20;21`.
pub fn loophole_example() -> TritCellWeights {
    TritCellWeights::from_cells(&[
        (Cell::new(0, 2, 0, 2), 0.25),
        (Cell::new(0, 2, 2, 0), 0.25),
        (Cell::new(2, 0, 0, 2), 0.25),
        (Cell::new(2, 0, 2, 1), 0.25),
    ])
    .expect("four quarter weights")
}
