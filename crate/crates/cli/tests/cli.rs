use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use trialaux::report::parse_report_csv;

fn trialaux(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trialaux"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn config(dir: &TempDir, json: &str) -> std::path::PathBuf {
    let p = dir.path().join("cfg.json");
    std::fs::write(&p, json).unwrap();
    p
}

const BASIC: &str = r#"{
  "seed": 11,
  "methods": ["CC", "DReg", "MVAR"],
  "external": { "generated": { "conflict": "NC", "size": "Half" } },
  "scales": ["z", "percentile"],
  "bootstrap_b": 500
}"#;

#[test]
fn writes_report_and_intervals() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let res = trialaux(&config(&dir, BASIC), &out, &["--threads", "1"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let rows = parse_report_csv(&std::fs::read_to_string(out.join("report.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    let intervals = std::fs::read_to_string(out.join("intervals.csv")).unwrap();
    assert_eq!(intervals.lines().count(), 7);
    assert!(!out.join("draws.csv").exists());
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, BASIC);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(trialaux(&cfg, &a, &[]).status.success());
    assert!(trialaux(&cfg, &b, &["--threads", "1"]).status.success());
    for f in ["report.csv", "intervals.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn markdown_report_and_draws() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = config(
        &dir,
        r#"{
          "seed": 3,
          "methods": ["Power", "MAC"],
          "external": { "generated": { "conflict": "NC", "size": "Full" } },
          "scales": ["z"],
          "mcmc": { "warmup": 1000, "kept": 1000, "seed": 1 },
          "dump_draws": true
        }"#,
    );
    let res = trialaux(&cfg, &out, &["--format", "markdown"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.lines().any(|l| l.starts_with("| MAC |")));
    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    assert!(draws.starts_with("method,scale,chain,draw,xi,tau,theta3_0,theta3_1\n"));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let empty = config(&dir, r#"{ "seed": 1, "methods": [] }"#);
    assert_eq!(trialaux(&empty, &out, &[]).status.code(), Some(2));

    let cfg = config(&dir, BASIC);
    assert_eq!(trialaux(&cfg, &out, &["--format", "xml"]).status.code(), Some(2));

    let unknown = config(&dir, r#"{ "seed": 1, "methods": ["Bogus"] }"#);
    assert_eq!(trialaux(&unknown, &out, &[]).status.code(), Some(2));

    assert_eq!(trialaux(&dir.path().join("nope.json"), &out, &[]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        r#"{
          "seed": 1,
          "methods": ["Hierarchical"],
          "external": { "generated": { "conflict": "NC", "size": "Full" } },
          "scales": ["z"],
          "mcmc": { "chains": 2, "warmup": 100, "kept": 10, "thin": 1 }
        }"#,
    );
    let res = trialaux(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("Hierarchical"));
}

#[test]
fn strict_escalates_small_bootstrap() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        r#"{
          "seed": 1,
          "methods": ["MVAR"],
          "aux_target": "intermediate",
          "external": { "generated": { "conflict": "NC", "size": "Full" } },
          "scales": ["z"],
          "bootstrap_b": 200
        }"#,
    );
    let out = dir.path().join("out");
    assert_eq!(trialaux(&cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(trialaux(&cfg, &out, &["--strict"]).status.code(), Some(3));
}
