//! End-to-end CLI tests: exit codes, report shape, reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

fn ksforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksforge")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("ksforge-cli-test-{}-{name}", std::process::id()));
    p
}

fn strip_wall_clock(text: &[u8]) -> String {
    String::from_utf8_lossy(text)
        .lines()
        .filter(|l| !l.contains("wall_clock_ms"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn exit_codes_follow_the_contract() {
    // 0: successful verification.
    let ok = ksforge(&["catalog", "verify", "nonlocal_basis"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout_json(&ok)["pass"].as_bool().unwrap());

    // 2: unknown catalog name.
    let unknown = ksforge(&["catalog", "verify", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));

    // 2: missing input file.
    let missing = ksforge(&["colour", "/nonexistent/scenario.json"]);
    assert_eq!(missing.status.code(), Some(2));

    // 2: malformed JSON.
    let bad = tmp("bad.json");
    std::fs::write(&bad, b"{broken").unwrap();
    let malformed = ksforge(&["colour", bad.to_str().unwrap()]);
    assert_eq!(malformed.status.code(), Some(2));
    std::fs::remove_file(&bad).ok();

    // 2: usage error from the parser.
    let usage = ksforge(&["simulate", "--samples", "10"]);
    assert_eq!(usage.status.code(), Some(2));

    // 2: qubit-count mismatch between psi and chi.
    let psi1 = tmp("psi1.json");
    let chi2 = tmp("chi2.json");
    std::fs::write(&psi1, r#"{"dim": 2, "amplitudes": [[1.0, 0.0], [0.0, 0.0]]}"#).unwrap();
    std::fs::write(
        &chi2,
        r#"{"factors": [{"dim": 2, "amplitudes": [[1.0, 0.0], [0.0, 0.0]]},
                        {"dim": 2, "amplitudes": [[1.0, 0.0], [0.0, 0.0]]}]}"#,
    )
    .unwrap();
    let mismatch = ksforge(&[
        "simulate",
        "--psi",
        psi1.to_str().unwrap(),
        "--chi",
        chi2.to_str().unwrap(),
        "--samples",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(mismatch.status.code(), Some(2));

    // 1: a statistical failure. The seed is chosen so that the binomial
    // tail event |z| > 4 genuinely occurs at 100 samples.
    let plus = tmp("plus.json");
    let zero = tmp("zero.json");
    std::fs::write(
        &plus,
        r#"{"dim": 2, "amplitudes": [[0.7071067811865476, 0.0], [0.7071067811865476, 0.0]]}"#,
    )
    .unwrap();
    std::fs::write(&zero, r#"{"dim": 2, "amplitudes": [[1.0, 0.0], [0.0, 0.0]]}"#).unwrap();
    let tail = ksforge(&[
        "simulate",
        "--psi",
        plus.to_str().unwrap(),
        "--chi",
        zero.to_str().unwrap(),
        "--samples",
        "100",
        "--seed",
        "15701",
    ]);
    assert_eq!(tail.status.code(), Some(1), "tail-event seed must fail the z gate");
    let report = stdout_json(&tail);
    assert!(!report["pass"].as_bool().unwrap());

    // 0: the same inputs at a quiet seed.
    let quiet = ksforge(&[
        "simulate",
        "--psi",
        plus.to_str().unwrap(),
        "--chi",
        zero.to_str().unwrap(),
        "--samples",
        "100000",
        "--seed",
        "42",
    ]);
    assert_eq!(quiet.status.code(), Some(0));
    for f in [psi1, chi2, plus, zero] {
        std::fs::remove_file(f).ok();
    }
}

#[test]
fn reports_are_reproducible_modulo_wall_clock() {
    let args =
        ["northcheck", "--n", "4", "--trials", "300", "--seed", "12345"];
    let first = ksforge(&args);
    let second = ksforge(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(strip_wall_clock(&first.stdout), strip_wall_clock(&second.stdout));

    // Worker count does not change the report either.
    let chi = tmp("repro-chi.json");
    std::fs::write(&chi, r#"{"dim": 2, "amplitudes": [[0.6, 0.0], [0.8, 0.0]]}"#).unwrap();
    let psi = tmp("repro-psi.json");
    std::fs::write(&psi, r#"{"dim": 2, "amplitudes": [[1.0, 0.0], [0.0, 0.0]]}"#).unwrap();
    let base_args = [
        "simulate",
        "--psi",
        psi.to_str().unwrap(),
        "--chi",
        chi.to_str().unwrap(),
        "--samples",
        "200000",
        "--seed",
        "9",
    ];
    let one = ksforge(&base_args);
    let mut with_jobs = base_args.to_vec();
    with_jobs.extend(["--jobs", "4"]);
    let four = ksforge(&with_jobs);
    assert_eq!(strip_wall_clock(&one.stdout), strip_wall_clock(&four.stdout));

    // KSFORGE_JOBS is honoured as the default worker count.
    let env_run = Command::new(env!("CARGO_BIN_EXE_ksforge"))
        .args(base_args)
        .env("KSFORGE_JOBS", "3")
        .output()
        .expect("binary runs");
    assert_eq!(strip_wall_clock(&one.stdout), strip_wall_clock(&env_run.stdout));
    std::fs::remove_file(chi).ok();
    std::fs::remove_file(psi).ok();
}

#[test]
fn catalog_build_round_trips_through_colour() {
    let out = tmp("peres57.json");
    let build = ksforge(&["catalog", "build", "peres57", "--out", out.to_str().unwrap()]);
    assert_eq!(build.status.code(), Some(0));

    let colour = ksforge(&["colour", out.to_str().unwrap()]);
    assert_eq!(colour.status.code(), Some(0));
    let report = stdout_json(&colour);
    assert_eq!(report["data"], serde_json::json!("UNCOLOURABLE"));
    std::fs::remove_file(out).ok();
}

#[test]
fn colour_north_flag_picks_the_all_north_colouring() {
    let out = tmp("nonlocal.json");
    ksforge(&["catalog", "build", "nonlocal_basis", "--out", out.to_str().unwrap()]);
    let colour = ksforge(&["colour", out.to_str().unwrap(), "--north"]);
    assert_eq!(colour.status.code(), Some(0));
    let report = stdout_json(&colour);
    assert_eq!(report["data"]["values"]["000"], serde_json::json!(1));
    let total: u64 = report["data"]["values"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(total, 1);

    // The searched colouring of the same scenario is also valid.
    let searched = ksforge(&["colour", out.to_str().unwrap()]);
    assert_eq!(searched.status.code(), Some(0));
    std::fs::remove_file(out).ok();
}

#[test]
fn bell_subcommands_emit_expected_reports() {
    let chsh = ksforge(&["bell", "chsh", "--state", "singlet"]);
    assert_eq!(chsh.status.code(), Some(0));
    let report = stdout_json(&chsh);
    let value = report["results"][0]["observed"].as_f64().unwrap();
    assert!((value - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);

    let mixed = ksforge(&["bell", "chsh", "--state", "maximally-mixed"]);
    assert_eq!(mixed.status.code(), Some(0));

    let pipeline = ksforge(&["bell", "pipeline", "--demo", "chsh"]);
    assert_eq!(pipeline.status.code(), Some(0));
    let report = stdout_json(&pipeline);
    assert_eq!(report["data"]["behaviour"], serde_json::json!("Nonlocal"));
    assert!(report["pass"].as_bool().unwrap());

    let hyper = ksforge(&["bell", "hypergraph", "--parties", "2", "--settings", "2,2"]);
    assert_eq!(hyper.status.code(), Some(0));
    let report = stdout_json(&hyper);
    assert_eq!(report["data"]["vertices"].as_array().unwrap().len(), 16);
    assert_eq!(report["data"]["hyperedges"].as_array().unwrap().len(), 12);

    let guard = ksforge(&["bell", "hypergraph", "--parties", "2", "--settings", "9,9"]);
    assert_eq!(guard.status.code(), Some(2));
}

#[test]
fn pipeline_accepts_ray_and_state_files() {
    // The CHSH demo spelled out through the file interface: sixteen
    // product rays and the singlet density matrix.
    let rays: Vec<serde_json::Value> = {
        let angles_a = [0.0, std::f64::consts::FRAC_PI_2];
        let angles_b = [std::f64::consts::FRAC_PI_4, 3.0 * std::f64::consts::PI / 4.0];
        let qubit = |theta: f64, outcome: u8| -> serde_json::Value {
            let t = if outcome == 0 { theta } else { theta + std::f64::consts::PI };
            let (s, c) = (t / 2.0).sin_cos();
            serde_json::json!({"dim": 2, "amplitudes": [[c, 0.0], [s, 0.0]]})
        };
        let mut out = Vec::new();
        for ta in angles_a {
            for tb in angles_b {
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        out.push(serde_json::json!({
                            "factors": [qubit(ta, a), qubit(tb, b)]
                        }));
                    }
                }
            }
        }
        out
    };
    let rays_file = tmp("pipeline-rays.json");
    std::fs::write(&rays_file, serde_json::to_string(&rays).unwrap()).unwrap();

    let h = 0.5;
    let state = serde_json::json!({
        "dim": 4,
        "matrix": [
            [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [-h, 0.0], [h, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        ],
    });
    let state_file = tmp("pipeline-state.json");
    std::fs::write(&state_file, serde_json::to_string(&state).unwrap()).unwrap();

    let out = ksforge(&[
        "bell",
        "pipeline",
        "--rays",
        rays_file.to_str().unwrap(),
        "--state",
        state_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["data"]["behaviour"], serde_json::json!("Nonlocal"));
    let chsh = report["data"]["chsh"].as_f64().unwrap();
    assert!((chsh - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);

    // A non-positive matrix is rejected as a usage error.
    let bogus = serde_json::json!({
        "dim": 2,
        "matrix": [[[1.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]],
    });
    std::fs::write(&state_file, serde_json::to_string(&bogus).unwrap()).unwrap();
    let rejected = ksforge(&[
        "bell",
        "pipeline",
        "--rays",
        rays_file.to_str().unwrap(),
        "--state",
        state_file.to_str().unwrap(),
    ]);
    assert_eq!(rejected.status.code(), Some(2));
    std::fs::remove_file(rays_file).ok();
    std::fs::remove_file(state_file).ok();
}

#[test]
fn simulate_basis_mode_matches_born_table() {
    let chi = tmp("ppp.json");
    // |+++> as a flat ray: all amplitudes equal.
    let amp = 1.0 / (8.0f64).sqrt();
    let amps: Vec<String> = (0..8).map(|_| format!("[{amp}, 0.0]")).collect();
    std::fs::write(&chi, format!(r#"{{"dim": 8, "amplitudes": [{}]}}"#, amps.join(","))).unwrap();
    let out = ksforge(&[
        "simulate",
        "--basis",
        "nonlocal",
        "--chi",
        chi.to_str().unwrap(),
        "--samples",
        "1000000",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "all member frequencies within 4 sigma");
    let report = stdout_json(&out);
    let members = report["data"]["members"].as_array().unwrap();
    assert_eq!(members.len(), 8);
    let total: f64 = members.iter().map(|m| m["frequency"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "frequencies sum to one");
    std::fs::remove_file(chi).ok();
}
