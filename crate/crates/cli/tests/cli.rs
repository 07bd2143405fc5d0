//! End-to-end runs of the `sinrcast` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sinrcast"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn sinrcast");
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_run_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.txt");
    let trace = dir.path().join("run.trace");
    let out = run_ok(&[
        "gen", "--kind", "line", "--n", "6", "--seed", "3", "--eps", "0.2", "--out",
        net.to_str().unwrap(),
    ]);
    assert!(out.contains("6 stations"), "{out}");

    // Deterministic: regenerating produces identical bytes.
    let first = fs::read(&net).unwrap();
    run_ok(&[
        "gen", "--kind", "line", "--n", "6", "--seed", "3", "--eps", "0.2", "--out",
        net.to_str().unwrap(),
    ]);
    assert_eq!(first, fs::read(&net).unwrap());

    let out = run_ok(&[
        "run",
        "--net",
        net.to_str().unwrap(),
        "--variant",
        "gran",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.contains("all_informed=true"), "{out}");
    let trace_text = fs::read_to_string(&trace).unwrap();
    let first_line = trace_text.lines().next().unwrap();
    assert!(first_line.starts_with("1\tsource\t"), "{first_line}");
}

#[test]
fn run_disturbance_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.txt");
    run_ok(&[
        "gen", "--kind", "line", "--n", "4", "--seed", "1", "--out", net.to_str().unwrap(),
    ]);
    let out = bin()
        .args(["run", "--net", net.to_str().unwrap(), "--variant", "gran", "--model",
            "disturbance"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn verify_ssf_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    fs::write(&good, "3 3\n1\n2\n3\n").unwrap();
    let out = run_ok(&["verify-ssf", "--file", good.to_str().unwrap()]);
    assert!(out.starts_with("PASS"), "{out}");

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 2\n1 2\n").unwrap();
    let res = bin().args(["verify-ssf", "--file", bad.to_str().unwrap()]).output().unwrap();
    assert!(!res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("FAIL") && text.contains("z = 1"), "{text}");
}

#[test]
fn experiment_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.toml");
    let csv = dir.path().join("out.csv");
    let summary = dir.path().join("summary.txt");
    fs::write(
        &spec,
        r#"
generator = "line"
n = 6
eps = 0.3
model = "classical"
variant = "gran"
seeds = [1, 2]
"#,
    )
    .unwrap();
    let out = run_ok(&[
        "experiment",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.contains("completion: 100.0%"), "{out}");
    let csv_text = fs::read_to_string(&csv).unwrap();
    assert!(csv_text
        .starts_with("seed,n,D,g,variant,model,stages,rounds,all_informed,rejections\n"));
    assert_eq!(csv_text.lines().count(), 3);
    assert!(Path::new(&summary).exists());
}
