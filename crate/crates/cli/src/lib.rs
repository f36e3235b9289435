//! Scenario runner behind the `postsel` binary.
//!
//! A scenario is a TOML document (see the README for the schema). [`run`]
//! dispatches it to the core engines and returns a [`RunReport`].

pub mod config;
pub mod report;

use std::fmt;
use std::time::Instant;

use postsel_core::lhv::{
    max_abs_s_deterministic, random_cell_weights, random_response_model, s_from_cells, s_indeterministic,
    s_with_discards, simulate_lhv,
};
use postsel_core::protocol::{
    bell_report, canonical_alice, check_basis_independence, exact_postselected, reversed_label_bob,
    run_quantum_mc,
};
use postsel_core::qcore::trace_distance;
use postsel_core::swap::{depolarizing_sweep, exact_swap, order_invariance, remote_state_check, run_swap};
use postsel_core::{BellReport, SwapConfig, Tally};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{parse_config, ConfigError, Mode, ScenarioConfig};
pub use report::{ErrorReport, RunReport};

use report::*;

/// Margin for exact claims against the classical bound.
pub const EXACT_MARGIN: f64 = 1e-9;
/// Random classical models must stay within this of the bound.
pub const RANDOM_MARGIN: f64 = 1e-12;
/// Standard errors of margin for sampled claims.
pub const SIGMA_MARGIN: f64 = 5.0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EMPTY_CELL: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(postsel_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_empty_cell() => EXIT_EMPTY_CELL,
            CliError::Core(e) if e.is_internal() => EXIT_INTERNAL,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "IoError",
        }
    }

    pub fn to_report(&self) -> ErrorReport {
        let (field, message) = match self {
            CliError::Config(e) => ((!e.field.is_empty()).then(|| e.field.clone()), e.message.clone()),
            CliError::Core(e) => (None, e.to_string()),
            CliError::Io(m) => (None, m.clone()),
        };
        ErrorReport {
            artifact_version: ARTIFACT_VERSION.to_string(),
            error: self.kind().to_string(),
            field,
            message,
            exit_code: self.exit_code(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Core(e) => write!(f, "{}: {e}", e.kind()),
            CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<postsel_core::Error> for CliError {
    fn from(e: postsel_core::Error) -> Self {
        CliError::Core(e)
    }
}

// Auxiliary random streams live at the top of the stream space, far from the
// per-trial streams 0..trials.
const BOOTSTRAP_STREAM: u64 = u64::MAX;
const RANDOM_CHECK_STREAM: u64 = u64::MAX - 1;

fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sampled_bell(t: &Tally, cfg: &ScenarioConfig) -> Result<BellReport, CliError> {
    let boot_seed = aux_rng(cfg.seed, BOOTSTRAP_STREAM).next_u64();
    Ok(bell_report(t, cfg.bootstrap, boot_seed)?)
}

fn sampled_verdict(b: &BellReport) -> &'static str {
    match b.se_s.value() {
        Some(se) if b.s.abs() - SIGMA_MARGIN * se > 2.0 => TASK_COMPLETED,
        Some(_) => NOT_COMPLETED,
        None => INCONCLUSIVE,
    }
}

fn exact_verdict(s: f64) -> &'static str {
    if s.abs() > 2.0 + EXACT_MARGIN {
        TASK_COMPLETED
    } else {
        NOT_COMPLETED
    }
}

fn bound_verdict(max_abs: f64, margin: f64) -> &'static str {
    if max_abs <= 2.0 + margin {
        CLASSICAL_BOUND
    } else {
        BOUND_EXCEEDED
    }
}

fn selection_rate(t: &Tally) -> f64 {
    t.n_selected() as f64 / t.n_total() as f64
}

fn empty_report(cfg: &ScenarioConfig) -> RunReport {
    RunReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        mode: cfg.mode,
        seed: cfg.seed,
        config: cfg.clone(),
        bell: None,
        s_exact: None,
        s_reversed_labels: None,
        selection_rates: None,
        selection_rate: None,
        signaling_defect: None,
        retained: None,
        distances: None,
        max_abs_s: None,
        witness: None,
        random: None,
        sweep: None,
        verdict: String::new(),
        duration_ms: 0.0,
    }
}

/// Runs one validated scenario. The report is returned unrounded; its
/// renderings round.
pub fn run(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut r = empty_report(cfg);
    let schemes = || cfg.schemes.clone().unwrap_or_default();
    match cfg.mode {
        Mode::QuantumExact => {
            let s = schemes();
            let (table, rates) = exact_postselected(&s.alice, &s.bob)?;
            let (verbatim, _) = exact_postselected(&canonical_alice(), &reversed_label_bob())?;
            let bell = BellReport::exact(&table);
            r.verdict = exact_verdict(bell.s).into();
            r.s_reversed_labels = Some(verbatim.bell_s());
            r.selection_rates = Some(rates);
            r.signaling_defect = Some(table.signaling_defect());
            r.bell = Some(bell);
        }
        Mode::QuantumMc => {
            let s = schemes();
            let t = run_quantum_mc(&s.alice, &s.bob, cfg.trials, cfg.seed)?;
            let bell = sampled_bell(&t, cfg)?;
            r.verdict = sampled_verdict(&bell).into();
            r.selection_rate = Some(selection_rate(&t));
            r.bell = Some(bell);
        }
        Mode::LhvMc => {
            let m = cfg
                .lhv_model
                .as_ref()
                .ok_or_else(|| ConfigError::new("lhv_model", "missing required table"))?;
            let t = simulate_lhv(m, cfg.trials, cfg.seed)?;
            let bell = sampled_bell(&t, cfg)?;
            r.s_exact = Some(m.exact_table()?.0.bell_s());
            r.verdict = sampled_verdict(&bell).into();
            r.selection_rate = Some(selection_rate(&t));
            r.bell = Some(bell);
        }
        Mode::LhvMax => {
            let (max, witness) = max_abs_s_deterministic();
            let count = cfg.random.map_or(config::DEFAULT_CELL_CHECKS, |c| c.count);
            let mut rng = aux_rng(cfg.seed, RANDOM_CHECK_STREAM);
            let random_max =
                (0..count).map(|_| s_from_cells(&random_cell_weights(&mut rng)).abs()).fold(0.0, f64::max);
            let supplied = cfg.cells.as_ref().map(s_from_cells);
            let worst = random_max.max(supplied.map_or(0.0, f64::abs));
            r.verdict = if bound_verdict(max, EXACT_MARGIN) == CLASSICAL_BOUND {
                bound_verdict(worst, RANDOM_MARGIN).into()
            } else {
                BOUND_EXCEEDED.into()
            };
            r.s_exact = supplied;
            r.max_abs_s = Some(max);
            r.witness = Some(witness.to_string());
            r.random = Some(RandomSummary { count, max_abs_s: random_max });
        }
        Mode::LhvIndet => {
            let checks = cfg.random.unwrap_or(config::RandomChecks {
                count: config::DEFAULT_MODEL_CHECKS,
                max_atoms: Some(config::DEFAULT_MAX_ATOMS),
            });
            let max_atoms = checks.max_atoms.unwrap_or(config::DEFAULT_MAX_ATOMS).max(1);
            let mut rng = aux_rng(cfg.seed, RANDOM_CHECK_STREAM);
            let random_max = (0..checks.count)
                .map(|_| {
                    let n = rng.random_range(1..=max_atoms);
                    s_indeterministic(&random_response_model(&mut rng, n)).abs()
                })
                .fold(0.0, f64::max);
            let supplied = cfg.response_model.as_ref().map(s_indeterministic);
            let worst = random_max.max(supplied.map_or(0.0, f64::abs));
            r.verdict = bound_verdict(worst, RANDOM_MARGIN).into();
            r.s_exact = supplied;
            r.random = Some(RandomSummary { count: checks.count, max_abs_s: random_max });
        }
        Mode::Loophole => {
            let w = cfg.trit_weights.clone().unwrap_or_else(postsel_core::lhv::loophole_example);
            let out = s_with_discards(&w)?;
            let bell = BellReport {
                e: out.e,
                s: out.s,
                se_e: [postsel_core::StdErr::NotComputed; 4],
                se_s: postsel_core::StdErr::NotComputed,
                n_total: 0,
                n_selected: 0,
            };
            r.verdict = exact_verdict(out.s).into();
            r.retained = Some(out.retained);
            r.bell = Some(bell);
        }
        Mode::Swap => {
            let opts = cfg.swap.clone().ok_or_else(|| ConfigError::new("swap", "missing options"))?;
            let sc =
                SwapConfig { n_trials: cfg.trials, noise: opts.noise, seed: cfg.seed, order: opts.order };
            let t = run_swap(&sc)?;
            let bell = sampled_bell(&t, cfg)?;
            let (exact, _) = exact_swap(&opts.noise)?;
            let remote = trace_distance(
                &remote_state_check(0, opts.noise.jitter_alice)?,
                &remote_state_check(1, opts.noise.jitter_alice)?,
            )?;
            r.s_exact = Some(exact.bell_s());
            r.selection_rate = Some(selection_rate(&t));
            r.distances = Some(Distances {
                remote_state: Some(remote),
                order_invariance: Some(order_invariance(&sc)?),
                ..Default::default()
            });
            if let Some(grid) = &opts.sweep {
                r.sweep = Some(sweep_rows(grid)?);
            }
            r.verdict = sampled_verdict(&bell).into();
            r.bell = Some(bell);
        }
        Mode::CheckIndependence => {
            let s = schemes();
            let tol = cfg.tolerance.unwrap_or(config::DEFAULT_TOLERANCE);
            let a = check_basis_independence(&s.alice, tol)?;
            let b = check_basis_independence(&s.bob, tol)?;
            r.verdict = if a.pass && b.pass { BASIS_INDEPENDENT } else { BASIS_DEPENDENT }.into();
            r.distances =
                Some(Distances { alice: Some(a.distance), bob: Some(b.distance), ..Default::default() });
        }
    }
    r.duration_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

fn sweep_rows(grid: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    config::check_grid(grid).map_err(|m| ConfigError::new("sweep", m))?;
    Ok(depolarizing_sweep(grid)?.into_iter().map(|(p, s)| SweepRow { p, s }).collect())
}

/// `p,S` rows of the exact depolarizing sweep.
pub fn emit_sweep(grid: &[f64]) -> Result<String, CliError> {
    let mut out = String::from("p,S\n");
    for row in sweep_rows(grid)? {
        out.push_str(&format!("{},{}\n", fmt_num(round_sig(row.p)), fmt_num(round_sig(row.s))));
    }
    Ok(out)
}
