use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "config.json";

fn conslaw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conslaw"))
        .args(args)
        .env_remove("CONSLAW_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not a JSON record ({e}): {stderr}"))
}

fn files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p.to_string_lossy().into_owned());
        }
    }
    out.sort();
    out
}

#[test]
fn help_and_version_succeed() {
    assert!(conslaw(&["--help"]).status.success());
    assert!(conslaw(&["--version"]).status.success());
    let out = conslaw(&["experiment", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for suite in ["ablate", "noise", "samples", "sweep", "pareto"] {
        assert!(text.contains(suite), "{suite} missing from help");
    }
}

#[test]
fn usage_errors_are_machine_readable() {
    let out = conslaw(&["experiment", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "usage");

    let out = conslaw(&["generate", "--system", "not_a_system"]);
    assert_eq!(out.status.code(), Some(2));

    let out = conslaw(&["generate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("--all"));

    let out = conslaw(&["discover", "--system", "lorenz", "--restarts", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = conslaw(&["discover", "--system", "lorenz", "--data", d, "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "missing_dataset");
    assert!(rec["message"].as_str().unwrap().contains("lorenz"));
}

#[test]
fn generate_is_byte_stable_and_audits_clean() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = conslaw(&["generate", "--system", "mass_spring,henon_heiles", "--seed", "42", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("mass_spring") && stdout.contains("true-law test constancy"));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{x} differs");
    }
    assert!(a.path().join("mass_spring/manifest.json").exists());
    assert!(a.path().join(CONFIG).exists());

    // Stored datasets reload with checksums verified and keep their audit.
    let audit_out = tempfile::tempdir().unwrap();
    let out = conslaw(&[
        "audit",
        "--system",
        "mass_spring,henon_heiles",
        "--data",
        a.path().to_str().unwrap(),
        "--out",
        audit_out.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(audit_out.path().join("audit.json")).unwrap()).unwrap();
    for r in records.as_array().unwrap() {
        assert!(r["test"].as_f64().unwrap() < 1e-6, "{r}");
    }
    assert_eq!(
        fs::read(audit_out.path().join("audit.json")).unwrap(),
        fs::read(a.path().join("audit.json")).unwrap()
    );
}

#[test]
fn corrupted_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(conslaw(&["generate", "--system", "lorenz", "--out", d]).status.success());
    let blob = dir.path().join("lorenz/trajectories.f32");
    let mut bytes = fs::read(&blob).unwrap();
    bytes[100] ^= 0xff;
    fs::write(&blob, bytes).unwrap();
    let out = conslaw(&["audit", "--system", "lorenz", "--data", d, "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "dataset");
}

#[test]
fn output_root_comes_from_the_environment() {
    let root = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_conslaw"))
        .args(["audit", "--system", "lotka_volterra"])
        .env("CONSLAW_OUTPUT_ROOT", root.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(root.path().join("audit/audit.json").exists());
    assert!(root.path().join("audit").join(CONFIG).exists());
}

#[test]
fn discover_outputs_do_not_depend_on_job_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "2")] {
        let out = conslaw(&["--jobs", jobs, "discover", "--system", "henon_heiles", "--seeds", "0", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        if x.ends_with("timings.json") {
            continue;
        }
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{x} differs");
    }
    let laws = fs::read_to_string(a.path().join("laws.csv")).unwrap();
    assert!(laws.lines().any(|l| l.contains("true_discovery")), "{laws}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("henon_heiles/seed_0.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["dr"], 1.0);
    assert!(a.path().join("timings.json").exists());
}
