use std::path::PathBuf;

use postsel_cli::config::{Mode, DEFAULT_TRIALS};
use postsel_cli::parse_config;
use postsel_core::protocol::canonical_schemes;
use postsel_core::MeasurementOrder;

fn example(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "docs", "examples", name].iter().collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn every_documented_example_parses_to_its_mode() {
    for mode in Mode::ALL {
        let cfg = parse_config(&example(&format!("{mode}.toml"))).unwrap();
        assert_eq!(cfg.mode, mode);
    }
}

#[test]
fn quantum_mc_example_is_canonical_with_a_million_trials() {
    let cfg = parse_config(&example("quantum-mc.toml")).unwrap();
    assert_eq!(cfg.trials, 1_000_000);
    assert_eq!(cfg.trials, DEFAULT_TRIALS);
    assert_eq!(cfg.seed, 20240611);
    assert_eq!(cfg.bootstrap, 1000);
    let s = cfg.schemes.unwrap();
    assert_eq!((s.alice, s.bob), canonical_schemes());
}

#[test]
fn quantum_exact_example_spells_out_the_canonical_schemes() {
    let cfg = parse_config(&example("quantum-exact.toml")).unwrap();
    let s = cfg.schemes.unwrap();
    let (alice, bob) = canonical_schemes();
    for basis in 0..2 {
        for state in 0..2 {
            let d = s.bob.angle(basis, state).radians() - bob.angle(basis, state).radians();
            assert!(d.abs() < 1e-12);
            assert_eq!(s.alice.angle(basis, state), alice.angle(basis, state));
        }
    }
}

#[test]
fn swap_example_keeps_order_and_grid() {
    let cfg = parse_config(&example("swap.toml")).unwrap();
    let swap = cfg.swap.unwrap();
    assert_eq!(swap.order, MeasurementOrder::PartiesFirst);
    assert_eq!(swap.sweep.unwrap().len(), 11);
}

#[test]
fn unnormalized_priors_name_the_field() {
    let doc = r#"
mode = "quantum-exact"
[alice]
basis0 = { angles_pi = [0.0, 1.0], priors = [0.7, 0.2] }
basis1 = { angles_pi = [0.5, 1.5] }
"#;
    let err = parse_config(doc).unwrap_err();
    assert_eq!(err.field, "alice.basis0.priors");
    assert!(err.message.contains("priors sum to"), "{}", err.message);
}

#[test]
fn loophole_weight_arity_is_checked() {
    let weights = vec!["0.0125"; 80].join(", ");
    let err = parse_config(&format!("mode = \"loophole\"\n[loophole]\nweights = [{weights}]")).unwrap_err();
    assert_eq!(err.field, "loophole.weights");
    assert!(err.message.contains("expected 81 weights, got 80"), "{}", err.message);
}

#[test]
fn unnormalized_cell_weights_are_rejected() {
    let err = parse_config("mode = \"lhv-max\"\n[cells]\ncells = { \"00;00\" = 0.5 }").unwrap_err();
    assert_eq!(err.field, "cells.weights");
    let err = parse_config("mode = \"loophole\"\n[loophole]\ncells = { \"02;02\" = 0.5, \"03;00\" = 0.5 }")
        .unwrap_err();
    assert!(err.field.starts_with("loophole.cells"));
}

#[test]
fn structural_errors_are_named() {
    let cases = [
        ("mode = \"bell\"", "mode"),
        ("trials = 3", "mode"),
        ("schema_version = 2\nmode = \"swap\"", "schema_version"),
        ("mode = \"quantum-mc\"\ntrials = 0", "trials"),
        ("mode = \"lhv-mc\"", "lhv_model"),
        ("mode = \"lhv-mc\"\n[lhv_model]\nlambda = [{ value = 0.0, prob = 1.0 }]", "lhv_model.lambda_prime"),
        ("mode = \"swap\"\n[noise]\ndepol_bob = 1.5", "noise.depol_bob"),
        ("mode = \"swap\"\n[swap]\nsweep = [0.0, 1.2]", "swap.sweep"),
        ("mode = \"swap\"\n[swap]\nsweep = []", "swap.sweep"),
        ("mode = \"quantum-exact\"\n[alice]\nbasis0 = { angles = [0.0, 1.0] }", "alice.basis1"),
        ("mode = \"quantum-exact\"\n[bob]\nbasis0 = { priors = [0.5, 0.5] }\nbasis1 = { angles = [0.0, 1.0] }", "bob.basis0.angles"),
        ("mode = \"lhv-max\"\n[noise]\ncharlie_mix = 0.1", "noise"),
        ("mode = \"check-independence\"\n[independence]\ntolerance = 0.0", "independence.tolerance"),
    ];
    for (doc, field) in cases {
        let err = parse_config(doc).unwrap_err();
        assert_eq!(err.field, field, "{doc}: {err}");
    }
}

#[test]
fn unknown_keys_and_bad_syntax_are_rejected() {
    assert!(parse_config("mode = \"swap\"\ntrails = 5").is_err());
    assert!(parse_config("mode = ").is_err());
    assert!(parse_config("mode = \"swap\"\n[noise]\ndepol = 0.1").is_err());
}

#[test]
fn invalid_lhv_model_is_rejected() {
    let doc = r#"
mode = "lhv-mc"
[lhv_model]
lambda = [{ value = 0.0, prob = 1.0 }]
lambda_prime = [{ value = 0.0, prob = 1.0 }]
response_a = [[0.0, 1.0]]
response_b = [[0.0, 1.0]]
select = [[1.5]]
"#;
    assert_eq!(parse_config(doc).unwrap_err().field, "lhv_model");
}
