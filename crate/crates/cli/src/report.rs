//! Run reports and their JSON, text and CSV renderings.

use std::fmt::Write as _;

use postsel_core::protocol::BASIS_PAIRS;
use postsel_core::{BellReport, StdErr};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Mode, ScenarioConfig};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIGNIFICANT_DIGITS: usize = 12;

pub const TASK_COMPLETED: &str = "task completed";
pub const NOT_COMPLETED: &str = "not completed";
pub const INCONCLUSIVE: &str = "inconclusive";
pub const CLASSICAL_BOUND: &str = "classical bound";
pub const BOUND_EXCEEDED: &str = "classical bound exceeded";
pub const BASIS_INDEPENDENT: &str = "basis independent";
pub const BASIS_DEPENDENT: &str = "basis dependent";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob: Option<f64>,
    /// Between Bob's conditional states of `beta` for Alice's two bases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_state: Option<f64>,
    /// Largest gap between the two measurement orders' joint tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_invariance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSummary {
    pub count: usize,
    pub max_abs_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub s: f64,
}

/// Everything one run produces. Field order is the serialized order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell: Option<BellReport>,
    /// Exact S of the supplied model or noise setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_exact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_reversed_labels: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_rates: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signaling_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Distances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    pub verdict: String,
    pub duration_ms: f64,
}

/// Rounds to `SIGNIFICANT_DIGITS` significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let r: f64 = s.parse().expect("formatted float parses");
    // keep -0.0 out of reports
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

impl RunReport {
    /// Same report with every float rounded, so that the printed document is
    /// exactly what a reader parses back.
    pub fn rounded(&self) -> RunReport {
        let mut v = serde_json::to_value(self).expect("report serializes");
        round_value(&mut v);
        serde_json::from_value(v).expect("rounded report deserializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rounded()).expect("report serializes")
    }

    /// JSON with the duration blanked, for reproducibility comparisons.
    pub fn to_json_without_duration(&self) -> String {
        let mut r = self.rounded();
        r.duration_ms = 0.0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    /// `a,b,E,se` rows, or `None` when the mode has no correlations.
    pub fn to_csv(&self) -> Option<String> {
        let bell = self.rounded().bell?;
        let mut out = String::from("a,b,E,se\n");
        for (ab, (a, b)) in BASIS_PAIRS.iter().enumerate() {
            writeln!(out, "{a},{b},{},{}", fmt_num(bell.e[ab]), fmt_se(bell.se_e[ab])).unwrap();
        }
        Some(out)
    }

    pub fn to_text(&self) -> String {
        let r = self.rounded();
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k:<18} {v}").unwrap();
        line("mode", r.mode.to_string());
        line("seed", r.seed.to_string());
        if let Some(b) = &r.bell {
            for (ab, (a, bb)) in BASIS_PAIRS.iter().enumerate() {
                line(&format!("E({a},{bb})"), format!("{} ± {}", fmt_num(b.e[ab]), fmt_se(b.se_e[ab])));
            }
            line("S", format!("{} ± {}", fmt_num(b.s), fmt_se(b.se_s)));
            if b.n_total > 0 {
                line("trials", format!("{} ({} selected)", b.n_total, b.n_selected));
            }
        }
        let opt = |v: Option<f64>| v.map(fmt_num);
        for (k, v) in [
            ("S exact", opt(r.s_exact)),
            ("S reversed labels", opt(r.s_reversed_labels)),
            ("selection rate", opt(r.selection_rate)),
            ("signaling defect", opt(r.signaling_defect)),
            ("max |S|", opt(r.max_abs_s)),
        ] {
            if let Some(v) = v {
                line(k, v);
            }
        }
        if let Some(rates) = r.selection_rates {
            line("selection rates", join(&rates));
        }
        if let Some(ret) = r.retained {
            line("retained", join(&ret));
        }
        if let Some(w) = &r.witness {
            line("witness", w.clone());
        }
        if let Some(d) = &r.distances {
            for (k, v) in [
                ("distance alice", d.alice),
                ("distance bob", d.bob),
                ("remote state", d.remote_state),
                ("order invariance", d.order_invariance),
            ] {
                if let Some(v) = v {
                    line(k, fmt_num(v));
                }
            }
        }
        if let Some(rs) = r.random {
            line("random max |S|", format!("{} over {} models", fmt_num(rs.max_abs_s), rs.count));
        }
        if let Some(rows) = &r.sweep {
            for row in rows {
                line(&format!("S(p = {})", fmt_num(row.p)), fmt_num(row.s));
            }
        }
        line("verdict", r.verdict.clone());
        line("duration ms", r.duration_ms.to_string());
        out
    }
}

/// Plain decimals for ordinary magnitudes, exponent form for tiny or huge ones.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn fmt_se(se: StdErr) -> String {
    match se {
        StdErr::Value(v) => fmt_num(v),
        StdErr::NotComputed => StdErr::NOT_COMPUTED.to_string(),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ")
}

/// What gets printed instead of a report when a run fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub artifact_version: String,
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
    pub exit_code: i32,
}
