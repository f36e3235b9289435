//! Scenario documents (TOML) and their validated form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use postsel_core::lhv::{loophole_example, Cell, HiddenValue, ResponseAtom};
use postsel_core::protocol::{canonical_alice, canonical_bob, DEFAULT_BOOTSTRAP};
use postsel_core::qcore::EXACT_TOL;
use postsel_core::{
    Angle, CellWeights, LhvSimModel, MeasurementOrder, NoiseParams, PreparationScheme, ResponseModel,
    TritCellWeights,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_CELL_CHECKS: usize = 10_000;
pub const DEFAULT_MODEL_CHECKS: usize = 1_000;
pub const DEFAULT_MAX_ATOMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    QuantumExact,
    QuantumMc,
    LhvMc,
    LhvMax,
    LhvIndet,
    Loophole,
    Swap,
    CheckIndependence,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::QuantumExact,
        Mode::QuantumMc,
        Mode::LhvMc,
        Mode::LhvMax,
        Mode::LhvIndet,
        Mode::Loophole,
        Mode::Swap,
        Mode::CheckIndependence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::QuantumExact => "quantum-exact",
            Mode::QuantumMc => "quantum-mc",
            Mode::LhvMc => "lhv-mc",
            Mode::LhvMax => "lhv-max",
            Mode::LhvIndet => "lhv-indet",
            Mode::Loophole => "loophole",
            Mode::Swap => "swap",
            Mode::CheckIndependence => "check-independence",
        }
    }

    /// Modes whose result depends on random trials.
    pub fn is_sampling(self) -> bool {
        matches!(self, Mode::QuantumMc | Mode::LhvMc | Mode::Swap)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let known: Vec<_> = Mode::ALL.iter().map(|m| m.as_str()).collect();
            ConfigError::new("mode", format!("unknown mode {s:?}; expected one of {}", known.join(", ")))
        })
    }
}

/// A rejected document: the dotted path of the offending field and why.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schemes {
    pub alice: PreparationScheme,
    pub bob: PreparationScheme,
}

impl Default for Schemes {
    fn default() -> Self {
        Schemes { alice: canonical_alice(), bob: canonical_bob() }
    }
}

/// How many random classical models to draw as a bound check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomChecks {
    pub count: usize,
    /// Upper bound on atoms per random response model (lhv-indet only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_atoms: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapOptions {
    pub noise: NoiseParams,
    pub order: MeasurementOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<f64>>,
}

/// Validated scenario with every default filled in. Only the fields the mode
/// uses are present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
    pub bootstrap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Schemes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lhv_model: Option<LhvSimModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<CellWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_model: Option<ResponseModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trit_weights: Option<TritCellWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomChecks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap: Option<SwapOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl ScenarioConfig {
    /// Defaults for `mode` with no document at all.
    pub fn for_mode(mode: Mode) -> Result<Self, ConfigError> {
        resolve(RawConfig { mode: Some(mode.as_str().into()), ..Default::default() })
    }

    /// Command-line overrides.
    pub fn with_overrides(mut self, trials: Option<u64>, seed: Option<u64>) -> Result<Self, ConfigError> {
        if let Some(n) = trials {
            check_trials(self.mode, n)?;
            self.trials = n;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        Ok(self)
    }
}

// Document layer. Everything optional so that missing fields get a named
// diagnostic from `resolve` rather than a bare deserializer message.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    mode: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    bootstrap: Option<usize>,
    alice: Option<RawScheme>,
    bob: Option<RawScheme>,
    lhv_model: Option<RawLhvModel>,
    cells: Option<RawWeights>,
    response_model: Option<RawResponseModel>,
    loophole: Option<RawWeights>,
    random: Option<RawRandom>,
    noise: Option<NoiseParams>,
    swap: Option<RawSwap>,
    independence: Option<RawIndependence>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    basis0: Option<RawBasis>,
    basis1: Option<RawBasis>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBasis {
    angles: Option<[f64; 2]>,
    angles_pi: Option<[f64; 2]>,
    priors: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLhvModel {
    lambda: Option<Vec<HiddenValue>>,
    lambda_prime: Option<Vec<HiddenValue>>,
    response_a: Option<Vec<[f64; 2]>>,
    response_b: Option<Vec<[f64; 2]>>,
    select: Option<Vec<Vec<f64>>>,
}

/// Either a dense weight vector or a sparse `"ij;kl" = weight` table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    weights: Option<Vec<f64>>,
    cells: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResponseModel {
    atoms: Option<Vec<ResponseAtom>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandom {
    count: Option<usize>,
    max_atoms: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSwap {
    order: Option<MeasurementOrder>,
    sweep: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndependence {
    tolerance: Option<f64>,
}

/// Parses and validates a TOML scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        ConfigError::new("", format!("malformed document: {msg}"))
    })?;
    resolve(raw)
}

fn check_trials(mode: Mode, n: u64) -> Result<(), ConfigError> {
    if mode.is_sampling() && n == 0 {
        return Err(ConfigError::new("trials", "must be at least 1"));
    }
    Ok(())
}

fn unused(mode: Mode, field: &str, present: bool) -> Result<(), ConfigError> {
    if present {
        Err(ConfigError::new(field, format!("not used by mode {mode}")))
    } else {
        Ok(())
    }
}

fn resolve(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let schema_version = raw.schema_version.unwrap_or(SCHEMA_VERSION);
    if schema_version != SCHEMA_VERSION {
        return Err(ConfigError::new(
            "schema_version",
            format!("unsupported version {schema_version}; this build reads {SCHEMA_VERSION}"),
        ));
    }
    let mode: Mode =
        raw.mode.as_deref().ok_or_else(|| ConfigError::new("mode", "missing required field"))?.parse()?;
    let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
    check_trials(mode, trials)?;

    let mut cfg = ScenarioConfig {
        schema_version,
        mode,
        trials,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        bootstrap: raw.bootstrap.unwrap_or(DEFAULT_BOOTSTRAP),
        schemes: None,
        lhv_model: None,
        cells: None,
        response_model: None,
        trit_weights: None,
        random: None,
        swap: None,
        tolerance: None,
    };

    let uses_schemes = matches!(mode, Mode::QuantumExact | Mode::QuantumMc | Mode::CheckIndependence);
    if uses_schemes {
        let defaults = Schemes::default();
        cfg.schemes = Some(Schemes {
            alice: resolve_scheme("alice", raw.alice, defaults.alice)?,
            bob: resolve_scheme("bob", raw.bob, defaults.bob)?,
        });
    } else {
        unused(mode, "alice", raw.alice.is_some())?;
        unused(mode, "bob", raw.bob.is_some())?;
    }

    match mode {
        Mode::LhvMc => {
            let m = raw.lhv_model.ok_or_else(|| ConfigError::new("lhv_model", "missing required table"))?;
            cfg.lhv_model = Some(resolve_lhv_model(m)?);
        }
        _ => unused(mode, "lhv_model", raw.lhv_model.is_some())?,
    }

    match mode {
        Mode::LhvMax => {
            if let Some(c) = raw.cells {
                let w = resolve_weights("cells", c, 16)?;
                let arr: [f64; 16] = w.try_into().expect("length checked");
                cfg.cells = Some(
                    CellWeights::new(arr).map_err(|e| ConfigError::new("cells.weights", e.to_string()))?,
                );
            }
        }
        _ => unused(mode, "cells", raw.cells.is_some())?,
    }

    match mode {
        Mode::LhvIndet => {
            if let Some(r) = raw.response_model {
                let atoms = r
                    .atoms
                    .ok_or_else(|| ConfigError::new("response_model.atoms", "missing required field"))?;
                cfg.response_model = Some(
                    ResponseModel::new(atoms)
                        .map_err(|e| ConfigError::new("response_model.atoms", e.to_string()))?,
                );
            }
        }
        _ => unused(mode, "response_model", raw.response_model.is_some())?,
    }

    match mode {
        Mode::LhvMax | Mode::LhvIndet => {
            let r = raw.random.unwrap_or(RawRandom { count: None, max_atoms: None });
            let (count, max_atoms) = if mode == Mode::LhvMax {
                unused(mode, "random.max_atoms", r.max_atoms.is_some())?;
                (r.count.unwrap_or(DEFAULT_CELL_CHECKS), None)
            } else {
                let atoms = r.max_atoms.unwrap_or(DEFAULT_MAX_ATOMS);
                if atoms == 0 {
                    return Err(ConfigError::new("random.max_atoms", "must be at least 1"));
                }
                (r.count.unwrap_or(DEFAULT_MODEL_CHECKS), Some(atoms))
            };
            cfg.random = Some(RandomChecks { count, max_atoms });
        }
        _ => unused(mode, "random", raw.random.is_some())?,
    }

    match mode {
        Mode::Loophole => {
            let tw = match raw.loophole {
                Some(l) => {
                    let w = resolve_weights("loophole", l, TritCellWeights::LEN)?;
                    TritCellWeights::new(w)
                        .map_err(|e| ConfigError::new("loophole.weights", e.to_string()))?
                }
                None => loophole_example(),
            };
            cfg.trit_weights = Some(tw);
        }
        _ => unused(mode, "loophole", raw.loophole.is_some())?,
    }

    match mode {
        Mode::Swap => {
            let noise = raw.noise.unwrap_or_default();
            noise.validate().map_err(|e| match e {
                postsel_core::Error::ParameterOutOfRange { name, .. } => {
                    ConfigError::new(format!("noise.{name}"), e.to_string())
                }
                other => ConfigError::new("noise", other.to_string()),
            })?;
            let (order, sweep) = match raw.swap {
                Some(s) => (s.order.unwrap_or_default(), s.sweep),
                None => (MeasurementOrder::default(), None),
            };
            if let Some(grid) = &sweep {
                check_grid(grid).map_err(|m| ConfigError::new("swap.sweep", m))?;
            }
            cfg.swap = Some(SwapOptions { noise, order, sweep });
        }
        _ => {
            unused(mode, "noise", raw.noise.is_some())?;
            unused(mode, "swap", raw.swap.is_some())?;
        }
    }

    match mode {
        Mode::CheckIndependence => {
            let tol = raw.independence.and_then(|i| i.tolerance).unwrap_or(DEFAULT_TOLERANCE);
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(ConfigError::new("independence.tolerance", "must be positive and finite"));
            }
            cfg.tolerance = Some(tol);
        }
        _ => unused(mode, "independence", raw.independence.is_some())?,
    }

    Ok(cfg)
}

/// Nonempty, every point in [0, 1].
pub fn check_grid(grid: &[f64]) -> Result<(), String> {
    if grid.is_empty() {
        return Err("grid is empty".into());
    }
    if let Some(p) = grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(format!("depolarizing strength {p} outside [0, 1]"));
    }
    Ok(())
}

fn resolve_scheme(
    party: &str,
    raw: Option<RawScheme>,
    default: PreparationScheme,
) -> Result<PreparationScheme, ConfigError> {
    let Some(raw) = raw else { return Ok(default) };
    let mut angles = [[Angle::new(0.0); 2]; 2];
    let mut priors = [[0.0; 2]; 2];
    for (basis, b) in [raw.basis0, raw.basis1].into_iter().enumerate() {
        let path = format!("{party}.basis{basis}");
        let b = b.ok_or_else(|| ConfigError::new(path.clone(), "missing required table"))?;
        let rad = match (b.angles, b.angles_pi) {
            (Some(a), None) => a,
            (None, Some(a)) => a.map(|k| k * std::f64::consts::PI),
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(format!("{path}.angles"), "give angles or angles_pi, not both"))
            }
            (None, None) => return Err(ConfigError::new(format!("{path}.angles"), "missing required field")),
        };
        if rad.iter().any(|t| !t.is_finite()) {
            return Err(ConfigError::new(format!("{path}.angles"), "angles must be finite"));
        }
        angles[basis] = rad.map(Angle::new);
        let p = b.priors.unwrap_or([0.5, 0.5]);
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ConfigError::new(format!("{path}.priors"), "priors must be nonnegative"));
        }
        let sum = p[0] + p[1];
        if (sum - 1.0).abs() > EXACT_TOL {
            return Err(ConfigError::new(format!("{path}.priors"), format!("priors sum to {sum}, not 1")));
        }
        priors[basis] = p;
    }
    PreparationScheme::new(angles, priors).map_err(|e| ConfigError::new(party, e.to_string()))
}

fn resolve_weights(table: &str, raw: RawWeights, len: usize) -> Result<Vec<f64>, ConfigError> {
    match (raw.weights, raw.cells) {
        (Some(w), None) => {
            if w.len() != len {
                return Err(ConfigError::new(
                    format!("{table}.weights"),
                    format!("expected {len} weights, got {}", w.len()),
                ));
            }
            Ok(w)
        }
        (None, Some(cells)) => {
            let mut w = vec![0.0; len];
            for (label, v) in cells {
                let path = format!("{table}.cells.{label:?}");
                let c: Cell = label
                    .parse()
                    .map_err(|e: postsel_core::Error| ConfigError::new(path.clone(), e.to_string()))?;
                let idx = if len == 16 {
                    if !c.is_binary() {
                        return Err(ConfigError::new(path, "binary cells only take values 0 and 1"));
                    }
                    c.binary_index()
                } else {
                    c.trit_index()
                };
                w[idx] += v;
            }
            Ok(w)
        }
        (Some(_), Some(_)) => Err(ConfigError::new(table, "give weights or cells, not both")),
        (None, None) => Err(ConfigError::new(format!("{table}.weights"), "missing required field")),
    }
}

fn resolve_lhv_model(m: RawLhvModel) -> Result<LhvSimModel, ConfigError> {
    let need = |name: &str| ConfigError::new(format!("lhv_model.{name}"), "missing required field");
    let lambda = m.lambda.ok_or_else(|| need("lambda"))?;
    let lambda_prime = m.lambda_prime.ok_or_else(|| need("lambda_prime"))?;
    let response_a = m.response_a.ok_or_else(|| need("response_a"))?;
    let response_b = m.response_b.ok_or_else(|| need("response_b"))?;
    let select = m.select.ok_or_else(|| need("select"))?;
    LhvSimModel::new(lambda, lambda_prime, response_a, response_b, select)
        .map_err(|e| ConfigError::new("lhv_model", e.to_string()))
}
