use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kamtori(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kamtori"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Column `name` of a CSV file, as floats.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).expect("column present");
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn error_line(o: &Output) -> serde_json::Value {
    serde_json::from_slice(o.stderr.trim_ascii()).expect("stderr is one JSON object")
}

#[test]
fn bnf_reaches_the_requested_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamtori(dir.path(), &["bnf", "--preset", "nondegenerate-cubic", "--order", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let order = column(&dir.path().join("bnf.summary.csv"), "residual_order");
    assert!(order[0] >= 7.0);
    assert!(dir.path().join("bnf.manifest.jsonl").exists());
}

#[test]
fn frequency_map_is_flat_along_the_degenerate_direction() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamtori(dir.path(), &["freq-map", "--preset", "degenerate-r1", "--q", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dev = column(&dir.path().join("freq-map.degenerate.csv"), "max_abs_omega_minus_omega0");
    assert!(!dev.is_empty());
    assert!(dev.iter().all(|x| *x <= 1e-10), "{dev:?}");
}

#[test]
fn rerun_reproduces_tables() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = kamtori(first.path(), &["--seed", "7", "dc-check", "--omega", "1,1.618033988749895", "--kappa", "0.1", "--tau", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.path().join("dc-check.manifest.jsonl");
    let o = kamtori(second.path(), &["rerun", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut compared = 0;
    for entry in fs::read_dir(first.path()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            assert_eq!(fs::read(&p).unwrap(), fs::read(second.path().join(p.file_name().unwrap())).unwrap());
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn scenario_rerun_matches() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    assert!(kamtori(first.path(), &["scenario", "--name", "cohomological-identity"]).status.success());
    let manifest = first.path().join("cohomological-identity.manifest.jsonl");
    assert!(kamtori(second.path(), &["rerun", "--manifest", manifest.to_str().unwrap()]).status.success());
    let table = "cohomological-identity.identity.csv";
    assert_eq!(fs::read(first.path().join(table)).unwrap(), fs::read(second.path().join(table)).unwrap());
}

#[test]
fn errors_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamtori(dir.path(), &["bnf", "--preset", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(6));
    assert_eq!(error_line(&o)["error"], "precondition");

    let bad = dir.path().join("bad.ham");
    fs::write(&bad, "omega 1 x\n").unwrap();
    let o = kamtori(dir.path(), &["bnf", "--hamiltonian", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(error_line(&o)["error"], "parse");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_kamtori"))
        .env("KAMTORI_OUT", &out)
        .args(["dc-check", "--omega", "1,1.618033988749895", "--kappa", "0.1", "--tau", "2"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("dc-check.manifest.jsonl").exists());
}
