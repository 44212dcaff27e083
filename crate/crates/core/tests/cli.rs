use std::path::Path;
use std::process::Command;

use dbc_core::cli::{load_capacity_csv, load_decay_csv, load_report, ExponentSummary, Units};
use dbc_core::converse::ProofSuiteReport;
use dbc_core::simulator::LemmaSuiteReport;

const IDENTITY: &str = r#"{"X":2,"Y":2,"Z":2,"W1":[[1,0],[0,1]],"W2":[[1,0],[0,1]]}"#;
const BSC: &str = r#"{"X":2,"Y":2,"Z":2,"W1":[[0.9,0.1],[0.1,0.9]],"W2":[[0.8,0.2],[0.2,0.8]]}"#;

fn dbc(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dbc"))
        .current_dir(dir)
        .env("DBC_THREADS", "1")
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("id.json"), IDENTITY).unwrap();
    std::fs::write(dir.path().join("bsc.json"), BSC).unwrap();
    dir
}

#[test]
fn capacity_single_mu_on_identity() {
    let dir = setup();
    let out = dbc(
        dir.path(),
        &[
            "capacity",
            "--channel",
            "id.json",
            "--mu-grid",
            "1:1:1",
            "--out",
            "cap.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("cap.csv")).unwrap();
    let (cfg, units, rows) = load_capacity_csv(&text).unwrap();
    assert_eq!(cfg.schema, 1);
    assert_eq!(units, Units::Nats);
    assert_eq!(rows.len(), 1);
    assert!((rows[0].value - std::f64::consts::LN_2).abs() < 1e-9);

    let out = dbc(
        dir.path(),
        &[
            "capacity",
            "--channel",
            "id.json",
            "--mu-grid",
            "1",
            "--bits",
        ],
    );
    let (_, units, rows) = load_capacity_csv(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(units, Units::Bits);
    assert!((rows[0].value - 1.0).abs() < 1e-9);
}

#[test]
fn exponent_at_origin_is_zero() {
    let dir = setup();
    let out = dbc(
        dir.path(),
        &["exponent", "--channel", "id.json", "--r1", "0", "--r2", "0"],
    );
    assert!(out.status.success());
    let rep = load_report::<ExponentSummary>(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(rep.result.f, 0.0);
    assert!(rep.result.pre_clamp <= 0.0);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = setup();
    let args = [
        "simulate",
        "--channel",
        "id.json",
        "--r1",
        "0.9",
        "--r2",
        "0.2",
        "--n",
        "2,3",
        "--seeds",
        "4",
        "--grid-points",
        "9",
    ];
    let a = dbc(dir.path(), &args);
    let b = dbc(dir.path(), &args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let (cfg, _, rows) = load_decay_csv(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(cfg.channel_spec.x, 2);
    for r in &rows {
        assert!(r.exponent >= r.f - 3f64.ln() / r.n as f64 - 1e-9);
    }
}

#[test]
fn proof_and_lemma_reports_round_trip() {
    let dir = setup();
    let out = dbc(
        dir.path(),
        &[
            "check-proof",
            "--channel",
            "bsc.json",
            "--n",
            "2",
            "--instances",
            "6",
            "--out",
            "p.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("p.json")).unwrap();
    let rep = load_report::<ProofSuiteReport>(&text).unwrap();
    assert_eq!(rep.passed, Some(true));
    assert_eq!(rep.result.instances, 6);
    assert_eq!(serde_json::to_string_pretty(&rep).unwrap() + "\n", text);

    let out = dbc(
        dir.path(),
        &[
            "check-lemmas",
            "--channel",
            "bsc.json",
            "--codes",
            "6",
            "--aux",
            "2",
        ],
    );
    assert!(out.status.success());
    let rep = load_report::<LemmaSuiteReport>(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(rep.result.all_passed());
    assert_eq!(rep.result.checks, 24);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = setup();
    let out = dbc(
        dir.path(),
        &[
            "capacity",
            "--channel",
            "missing.json",
            "--out",
            "never.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("never.csv").exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

    let out = dbc(
        dir.path(),
        &["capacity", "--channel", "id.json", "--mu-grid", "2,1"],
    );
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"X":2,"Y":2,"Z":2,"W1":[[0.5,0.6],[0,1]],"W2":[[1,0],[0,1]]}"#,
    )
    .unwrap();
    let out = dbc(
        dir.path(),
        &[
            "exponent",
            "--channel",
            "bad.json",
            "--r1",
            "0",
            "--r2",
            "0",
            "--out",
            "e.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("e.json").exists());

    let out = dbc(
        dir.path(),
        &["exponent", "--channel", "id.json", "--r1=-1", "--r2", "0"],
    );
    assert_eq!(out.status.code(), Some(3));

    let out = dbc(dir.path(), &["exponent", "--channel", "id.json"]);
    assert_eq!(out.status.code(), Some(2));
}
