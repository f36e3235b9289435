//! Dense quantum mechanics for one to four qubits.
//!
//! Qubit 0 is the leftmost tensor factor and the most significant bit of an
//! amplitude index, so `|q0 q1 ... q(n-1)>` lives at index
//! `q0 * 2^(n-1) + ... + q(n-1)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for structural checks (Hermiticity, trace, positivity, idempotence).
pub const STRUCT_TOL: f64 = 1e-9;
/// Tolerance for quantities that are exact up to floating-point rounding.
pub const EXACT_TOL: f64 = 1e-12;
pub const MAX_QUBITS: usize = 4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// An angle in radians, reduced into `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct Angle(f64);

impl Angle {
    pub fn new(theta: f64) -> Self {
        debug_assert!(theta.is_finite(), "angle must be finite");
        let r = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        Angle(if r >= TAU { 0.0 } else { r })
    }

    /// `k * pi`, the way the canonical schemes are written.
    pub fn pi_times(k: f64) -> Self {
        Angle::new(k * PI)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn offset(self, delta: f64) -> Self {
        Angle::new(self.0 + delta)
    }
}

impl From<f64> for Angle {
    fn from(theta: f64) -> Self {
        Angle::new(theta)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}pi", self.0 / PI)
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::QubitCount(n))
    }
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::QubitCount(0));
    }
    let n = dim.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

#[inline]
fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// A normalized state vector of 1..=4 qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: DVector<Complex64>,
}

impl PureState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())?;
        let amps = DVector::from_vec(amps);
        let norm2 = amps.norm_squared();
        if (norm2 - 1.0).abs() > EXACT_TOL {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(PureState { n_qubits, amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        PureState::new(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Computational basis state `|index>` on `n_qubits` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index + 1 });
        }
        let mut amps = DVector::from_element(dim, ZERO);
        amps[index] = ONE;
        Ok(PureState { n_qubits, amps })
    }

    pub fn zero() -> Self {
        ket_theta(Angle::new(0.0))
    }

    pub fn one() -> Self {
        ket_theta(Angle::new(PI))
    }

    pub fn plus() -> Self {
        ket_theta(Angle::new(PI / 2.0))
    }

    /// `|-> = (|0> - |1>)/sqrt(2)`. `ket_theta(3pi/2)` is the same ray with the
    /// opposite global sign.
    pub fn minus() -> Self {
        PureState::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]).expect("unit vector")
    }

    /// Normalizes an arbitrary nonzero vector.
    pub(crate) fn normalized(amps: DVector<Complex64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())?;
        let norm = amps.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Ok(PureState { n_qubits, amps: amps / Complex64::new(norm, 0.0) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub(crate) fn vector(&self) -> &DVector<Complex64> {
        &self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.n_qubits, &self.amps * self.amps.adjoint())
    }
}

/// `cos(theta/2)|0> + sin(theta/2)|1>`.
pub fn ket_theta(theta: Angle) -> PureState {
    let half = theta.radians() / 2.0;
    PureState {
        n_qubits: 1,
        amps: DVector::from_vec(vec![Complex64::new(half.cos(), 0.0), Complex64::new(half.sin(), 0.0)]),
    }
}

/// Kronecker product with `u` as the leftmost factor.
pub fn tensor(u: &PureState, v: &PureState) -> Result<PureState> {
    let n = u.n_qubits + v.n_qubits;
    check_qubits(n)?;
    Ok(PureState { n_qubits: n, amps: u.amps.kronecker(&v.amps) })
}

/// `(|00> + |11>)/sqrt(2)`.
pub fn phi_plus() -> PureState {
    PureState::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).expect("unit vector")
}

fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// An orthogonal projector on 1..=4 qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    n_qubits: usize,
    m: DMatrix<Complex64>,
}

impl Projector {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidProjector("matrix is not square".into()));
        }
        let n_qubits = qubits_for_dim(m.nrows())?;
        let herm = hermitian_defect(&m);
        if herm > STRUCT_TOL {
            return Err(Error::InvalidProjector(format!("not Hermitian (defect {herm:e})")));
        }
        let idem = max_abs(&(&m * &m - &m));
        if idem > STRUCT_TOL {
            return Err(Error::InvalidProjector(format!("not idempotent (defect {idem:e})")));
        }
        Ok(Projector { n_qubits, m })
    }

    /// `|psi><psi|`.
    pub fn onto(state: &PureState) -> Self {
        Projector { n_qubits: state.n_qubits, m: state.amps.clone() * state.amps.adjoint() }
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1 << n_qubits;
        Ok(Projector { n_qubits, m: DMatrix::identity(d, d) })
    }

    /// `1 - P`.
    pub fn complement(&self) -> Self {
        let d = self.m.nrows();
        Projector { n_qubits: self.n_qubits, m: DMatrix::identity(d, d) - &self.m }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }
}

/// Clamps values within [`EXACT_TOL`] of `[0, 1]`; anything further out is a bug.
pub fn clamp_probability(p: f64) -> Result<f64> {
    if !p.is_finite() || !(-EXACT_TOL..=1.0 + EXACT_TOL).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `<psi|P|psi>`.
pub fn born_prob(state: &PureState, p: &Projector) -> Result<f64> {
    if state.dim() != p.m.nrows() {
        return Err(Error::DimensionMismatch { expected: p.m.nrows(), got: state.dim() });
    }
    let v = state.amps.dotc(&(&p.m * &state.amps));
    clamp_probability(v.re)
}

/// A Hermitian, unit-trace, positive semidefinite operator on 1..=4 qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDensity("matrix is not square".into()));
        }
        let n_qubits = qubits_for_dim(m.nrows())?;
        validate_density(&m)?;
        Ok(DensityMatrix { n_qubits, m })
    }

    /// Internal constructor for results of operations that preserve the
    /// density-matrix invariants; re-validated in debug builds.
    pub(crate) fn new_unchecked(n_qubits: usize, m: DMatrix<Complex64>) -> Self {
        debug_assert!(validate_density(&m).is_ok(), "density invariant violated: {:?}", validate_density(&m));
        DensityMatrix { n_qubits, m }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1 << n_qubits;
        let m = DMatrix::identity(d, d) / Complex64::new(d as f64, 0.0);
        Ok(DensityMatrix { n_qubits, m })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.m[(r, c)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    /// `tr(A rho)` for Hermitian `A`, returned as its real part.
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Result<f64> {
        if op.shape() != self.m.shape() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.nrows() });
        }
        Ok((op * &self.m).trace().re)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_entry_diff(&self, other: &DensityMatrix) -> f64 {
        if self.m.shape() != other.m.shape() {
            return f64::INFINITY;
        }
        max_abs(&(&self.m - &other.m))
    }
}

/// Checks Hermiticity, unit trace and positive semidefiniteness.
pub fn validate_density(m: &DMatrix<Complex64>) -> Result<()> {
    let herm = hermitian_defect(m);
    if herm > STRUCT_TOL {
        return Err(Error::InvalidDensity(format!("not Hermitian (defect {herm:e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > STRUCT_TOL || tr.im.abs() > STRUCT_TOL {
        return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
    }
    let min_eig = hermitian_eigenvalues(m).first().copied().unwrap_or(0.0);
    if min_eig < -STRUCT_TOL {
        return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:e}")));
    }
    Ok(())
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    // symmetrize first so rounding noise cannot leak into the solver
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// `sum_i p_i |psi_i><psi_i|`.
pub fn mixture_density(components: &[(f64, PureState)]) -> Result<DensityMatrix> {
    let first = components.first().ok_or_else(|| Error::InvalidDensity("empty mixture".into()))?;
    let n = first.1.n_qubits;
    let d = first.1.dim();
    let mut total = 0.0;
    let mut m = DMatrix::from_element(d, d, ZERO);
    for (p, psi) in components {
        if !(p.is_finite() && *p >= 0.0) {
            return Err(Error::NotNormalizedProbabilities(*p));
        }
        if psi.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: psi.dim() });
        }
        total += p;
        m += (&psi.amps * psi.amps.adjoint()) * Complex64::new(*p, 0.0);
    }
    if (total - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalizedProbabilities(total));
    }
    Ok(DensityMatrix::new_unchecked(n, m))
}

/// `(1/2) sum |eig(rho - sigma)|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: sigma.dim() });
    }
    let diff = &rho.m - &sigma.m;
    let d: f64 = hermitian_eigenvalues(&diff).iter().map(|e| e.abs()).sum::<f64>() / 2.0;
    Ok(d.clamp(0.0, 1.0))
}

fn normalize_keep(keep: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.len() != keep.len() {
        return Err(Error::InvalidSubsystem(format!("duplicate qubit in {keep:?}")));
    }
    if k.is_empty() {
        return Err(Error::InvalidSubsystem("nothing to keep".into()));
    }
    if let Some(&q) = k.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidSubsystem(format!("qubit {q} out of range for {n} qubits")));
    }
    Ok(k)
}

/// Partial trace of an arbitrary (possibly unnormalized) operator. Kept qubits
/// appear in ascending order.
pub(crate) fn partial_trace_matrix(
    m: &DMatrix<Complex64>,
    n: usize,
    keep: &[usize],
) -> Result<DMatrix<Complex64>> {
    let keep = normalize_keep(keep, n)?;
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let sub = |i: usize, qs: &[usize]| qs.iter().fold(0usize, |acc, &q| (acc << 1) | bit_of(i, q, n));
    let dk = 1 << keep.len();
    let mut out = DMatrix::from_element(dk, dk, ZERO);
    let d = 1 << n;
    for r in 0..d {
        let rt = sub(r, &traced);
        let rk = sub(r, &keep);
        for c in 0..d {
            if sub(c, &traced) == rt {
                out[(rk, sub(c, &keep))] += m[(r, c)];
            }
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(&rho.m, rho.n_qubits, keep)?;
    let k = keep.len();
    Ok(DensityMatrix::new_unchecked(k, m))
}

/// `(1 - p) rho + p I / 2^n`.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange { name: "depolarizing strength", value: p });
    }
    let d = rho.dim();
    let mixed = DMatrix::<Complex64>::identity(d, d) / Complex64::new(d as f64, 0.0);
    let m = &rho.m * Complex64::new(1.0 - p, 0.0) + mixed * Complex64::new(p, 0.0);
    Ok(DensityMatrix::new_unchecked(rho.n_qubits, m))
}

/// Single-qubit depolarizing channel acting on `qubit` of an `n`-qubit operator:
/// `(1 - p) rho + p (tr_q rho) (x) I/2`. Linear, so it also acts on unnormalized operators.
pub(crate) fn depolarize_qubit_matrix(
    m: &DMatrix<Complex64>,
    n: usize,
    qubit: usize,
    p: f64,
) -> Result<DMatrix<Complex64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange { name: "depolarizing strength", value: p });
    }
    if qubit >= n {
        return Err(Error::InvalidSubsystem(format!("qubit {qubit} out of range for {n} qubits")));
    }
    let mask = 1usize << (n - 1 - qubit);
    let d = 1 << n;
    let mut out = m * Complex64::new(1.0 - p, 0.0);
    for r in 0..d {
        for c in 0..d {
            if (r & mask) == (c & mask) {
                let r0 = r & !mask;
                let c0 = c & !mask;
                let reduced = m[(r0, c0)] + m[(r0 | mask, c0 | mask)];
                out[(r, c)] += reduced * Complex64::new(0.5 * p, 0.0);
            }
        }
    }
    Ok(out)
}

pub fn depolarize_qubit(rho: &DensityMatrix, qubit: usize, p: f64) -> Result<DensityMatrix> {
    let m = depolarize_qubit_matrix(&rho.m, rho.n_qubits, qubit, p)?;
    Ok(DensityMatrix::new_unchecked(rho.n_qubits, m))
}

/// Lifts an operator on `targets` (in the given order) to the full `n`-qubit space.
pub fn embed_operator(op: &DMatrix<Complex64>, targets: &[usize], n: usize) -> Result<DMatrix<Complex64>> {
    check_qubits(n)?;
    let k = targets.len();
    if op.nrows() != 1 << k || !op.is_square() {
        return Err(Error::DimensionMismatch { expected: 1 << k, got: op.nrows() });
    }
    let mut seen = [false; MAX_QUBITS];
    for &q in targets {
        if q >= n || seen[q] {
            return Err(Error::InvalidSubsystem(format!("bad target list {targets:?}")));
        }
        seen[q] = true;
    }
    let mask: usize = targets.iter().map(|&q| 1usize << (n - 1 - q)).sum();
    let sub = |i: usize| targets.iter().fold(0usize, |acc, &q| (acc << 1) | bit_of(i, q, n));
    let d = 1 << n;
    let mut out = DMatrix::from_element(d, d, ZERO);
    for r in 0..d {
        for c in 0..d {
            if (r & !mask) == (c & !mask) {
                out[(r, c)] = op[(sub(r), sub(c))];
            }
        }
    }
    Ok(out)
}

/// Verifies that `projectors` are pairwise orthogonal and sum to the identity.
pub fn check_resolution(projectors: &[Projector]) -> Result<()> {
    let first =
        projectors.first().ok_or_else(|| Error::IncompleteProjectors("empty projector set".into()))?;
    let d = first.m.nrows();
    let mut sum = DMatrix::from_element(d, d, ZERO);
    for (i, p) in projectors.iter().enumerate() {
        if p.m.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.m.nrows() });
        }
        for q in &projectors[i + 1..] {
            let overlap = max_abs(&(&p.m * &q.m));
            if overlap > STRUCT_TOL {
                return Err(Error::IncompleteProjectors(format!(
                    "projectors not orthogonal (overlap {overlap:e})"
                )));
            }
        }
        sum += &p.m;
    }
    let defect = max_abs(&(sum - DMatrix::identity(d, d)));
    if defect > STRUCT_TOL {
        return Err(Error::IncompleteProjectors(format!(
            "projectors do not sum to identity (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Samples an outcome with probability `<psi|P_k|psi>` and returns it with the
/// renormalized post-measurement state.
pub fn measure_projective<R: Rng + ?Sized>(
    state: &PureState,
    projectors: &[Projector],
    rng: &mut R,
) -> Result<(usize, PureState)> {
    check_resolution(projectors)?;
    let probs = projectors.iter().map(|p| born_prob(state, p)).collect::<Result<Vec<_>>>()?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut outcome = None;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        outcome = Some(k);
        if u < acc {
            break;
        }
    }
    let k = outcome.ok_or(Error::NotNormalized(0.0))?;
    let post = PureState::normalized(&projectors[k].m * &state.amps)?;
    Ok((k, post))
}
