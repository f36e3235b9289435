use postsel_cli::report::{RunReport, CLASSICAL_BOUND, TASK_COMPLETED};
use postsel_cli::{emit_sweep, parse_config, run, CliError, Mode, ScenarioConfig};
use postsel_core::protocol::TSIRELSON;

fn small(mode: Mode) -> ScenarioConfig {
    ScenarioConfig::for_mode(mode).unwrap().with_overrides(Some(20_000), Some(5)).unwrap()
}

fn lhv_mc() -> ScenarioConfig {
    let doc = r#"
mode = "lhv-mc"
trials = 20000
seed = 3
bootstrap = 200
[lhv_model]
lambda = [{ value = 0.0, prob = 0.5 }, { value = 1.0, prob = 0.5 }]
lambda_prime = [{ value = 0.0, prob = 1.0 }]
response_a = [[0.0, 1.0], [1.0, 1.0]]
response_b = [[0.0, 1.0]]
select = [[1.0], [0.5]]
"#;
    parse_config(doc).unwrap()
}

fn all_configs() -> Vec<ScenarioConfig> {
    let mut v: Vec<_> = Mode::ALL.into_iter().filter(|m| *m != Mode::LhvMc).map(small).collect();
    v.push(lhv_mc());
    v
}

#[test]
fn reports_round_trip_through_json() {
    for cfg in all_configs() {
        let report = run(&cfg).unwrap();
        let text = report.to_json();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report.rounded(), "{}", cfg.mode);
        assert_eq!(back.to_json(), text);
        // the echo carries rounded floats, everything else verbatim
        let key = |c: &ScenarioConfig| (c.mode, c.trials, c.seed, c.bootstrap);
        assert_eq!(key(&back.config), key(&cfg));
        let echo = serde_json::to_value(&back.config).unwrap();
        let orig = serde_json::to_value(&cfg).unwrap();
        assert!(close_values(&echo, &orig), "{}", cfg.mode);
    }
}

fn close_values(a: &serde_json::Value, b: &serde_json::Value) -> bool {
    use serde_json::Value::*;
    match (a, b) {
        (Number(x), Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= 1e-11,
        (Array(x), Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(u, v)| close_values(u, v)),
        (Object(x), Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, u)| y.get(k).is_some_and(|v| close_values(u, v)))
        }
        _ => a == b,
    }
}

#[test]
fn reports_echo_resolved_defaults() {
    let report = run(&small(Mode::Swap)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let noise = &v["config"]["swap"]["noise"];
    for key in ["depol_alice", "depol_bob", "jitter_alice", "jitter_bob", "charlie_mix"] {
        assert_eq!(noise[key], 0.0, "{key}");
    }
    assert_eq!(v["config"]["swap"]["order"], "parties-first");
    assert_eq!(v["config"]["bootstrap"], 1000);
}

#[test]
fn field_order_is_fixed() {
    let text = run(&small(Mode::QuantumExact)).unwrap().to_json();
    let keys = [
        "\"artifact_version\"",
        "\"mode\"",
        "\"seed\"",
        "\"config\"",
        "\"bell\"",
        "\"verdict\"",
        "\"duration_ms\"",
    ];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    assert!(text
        .trim_end()
        .trim_end_matches('}')
        .trim_end()
        .split('\n')
        .next_back()
        .unwrap()
        .contains("duration_ms"));
}

#[test]
fn exact_report_prints_verdict_and_value() {
    let r = run(&small(Mode::QuantumExact)).unwrap().rounded();
    let bell = r.bell.unwrap();
    assert!((bell.s - TSIRELSON).abs() < 1e-4);
    assert!(format!("{:.4}", bell.s) == "2.8284");
    assert_eq!(r.verdict, TASK_COMPLETED);
    assert_eq!(bell.se_s.value(), None);
    let text = run(&small(Mode::QuantumExact)).unwrap().to_json();
    assert!(text.contains("\"se_s\": \"not computed\""));
}

#[test]
fn lhv_max_reports_classical_bound() {
    let r = run(&small(Mode::LhvMax)).unwrap();
    assert_eq!(r.max_abs_s, Some(2.0));
    assert_eq!(r.verdict, CLASSICAL_BOUND);
}

#[test]
fn loophole_reports_four_with_quarter_retention() {
    let r = run(&small(Mode::Loophole)).unwrap();
    assert_eq!(r.bell.unwrap().s, 4.0);
    assert_eq!(r.retained, Some([0.25; 4]));
}

#[test]
fn csv_matches_structured_report() {
    let report = run(&small(Mode::QuantumMc)).unwrap();
    let csv = report.to_csv().unwrap();
    let bell = report.rounded().bell.unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,b,E,se"));
    for (ab, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols[2].parse::<f64>().unwrap(), bell.e[ab]);
        assert_eq!(cols[3].parse::<f64>().unwrap(), bell.se_e[ab].value().unwrap());
    }
    assert!(run(&small(Mode::LhvMax)).unwrap().to_csv().is_none());
}

#[test]
fn sweep_rows_are_exact_and_monotone() {
    let csv = emit_sweep(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (p, s) = l.split_once(',').unwrap();
            (p.parse().unwrap(), s.parse().unwrap())
        })
        .collect();
    assert_eq!(csv.lines().next(), Some("p,S"));
    assert!((rows[0].1 - TSIRELSON).abs() < 1e-9);
    assert!(rows[4].1.abs() < 1e-9);
    for w in rows.windows(2) {
        assert!(w[1].1 <= w[0].1);
    }
    for &(p, s) in &rows[1..4] {
        assert!(s > 0.0 && s < TSIRELSON);
        let want = TSIRELSON * (1.0 - p) * (1.0 - p);
        assert!((s - want).abs() < 1e-9);
    }
    assert!(matches!(emit_sweep(&[0.5, 1.01]), Err(CliError::Config(_))));
    assert!(emit_sweep(&[]).is_err());
}

#[test]
fn undefined_statistics_map_to_their_exit_code() {
    // Bob's two basis-0 states coincide with Alice's orthogonal partner: some
    // (a, b) pair never passes Charlie.
    let doc = r#"
mode = "quantum-exact"
[bob]
basis0 = { angles_pi = [1.0, 1.0] }
basis1 = { angles_pi = [1.0, 1.0] }
[alice]
basis0 = { angles_pi = [0.0, 0.0] }
basis1 = { angles_pi = [0.0, 0.0] }
"#;
    let err = run(&parse_config(doc).unwrap()).unwrap_err();
    assert_eq!(err.kind(), "EmptyCell");
    assert_eq!(err.exit_code(), 3);
    let report = err.to_report();
    assert_eq!(report.error, "EmptyCell");

    let all_discard = "mode = \"loophole\"\n[loophole]\ncells = { \"22;22\" = 1.0 }";
    let err = run(&parse_config(all_discard).unwrap()).unwrap_err();
    assert_eq!((err.kind(), err.exit_code()), ("AllDiscarded", 3));
}

#[test]
fn text_rendering_mentions_the_verdict() {
    let text = run(&small(Mode::CheckIndependence)).unwrap().to_text();
    assert!(text.contains("basis independent"));
}
