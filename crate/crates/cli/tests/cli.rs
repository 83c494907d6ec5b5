use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Duration;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hbi-lab"));
    c.env_remove("HBI_LAB_SEED");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_subcommand_documents_its_flags() {
    let cases: [(&[&str], &[&str]); 8] = [
        (&["capacity"], &["--channel", "--tol", "--max-iter", "--out"]),
        (&["rd"], &["--source", "--distortion", "--at-distortion", "--at-rate", "--out"]),
        (&["mi"], &["--joint", "--a", "--b", "--given"]),
        (&["theorems"], &["run-all"]),
        (&["theorems", "run-all"], &["--out", "--random", "--seed"]),
        (&["sweep"], &["--config", "--out", "--parallel"]),
        (&["ingest-check"], &["--strict"]),
        (&["version"], &["--help"]),
    ];
    for (cmd, flags) in cases {
        let mut args = cmd.to_vec();
        args.push("--help");
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{cmd:?}");
        let text = stdout(&o);
        for f in flags {
            assert!(text.contains(f), "{cmd:?} help lacks {f}:\n{text}");
        }
    }
}

#[test]
fn version_is_one_semver_line() {
    let o = run(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let parts: Vec<&str> = lines[0].split('.').collect();
    assert_eq!(parts.len(), 3);
    assert!(parts.iter().all(|x| x.parse::<u64>().is_ok()));
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error:"));
    assert!(stderr(&o).contains("Usage"));
    let o = run(&["sweep", "alpha", "--config", "missing.json", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim(), "error: config not found");
    assert!(o.stdout.is_empty());
    let o = run(&["sweep", "beta", "--config", p(&fixture("alpha_small.json")), "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "alpha", "--config", p(&fixture("empty_grid.json")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:") && stderr(&o).contains("no cells"));

    let o = run(&["sweep", "noise", "--config", p(&fixture("alpha_small.json")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"input_support": [0, 1], "output_support": [0, 1], "rows": [[0.9, 0.2], [0, 1]]}"#).unwrap();
    let o = run(&["capacity", "--channel", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));

    // Output directory below a regular file cannot be created.
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = run(&["sweep", "sufficiency", "--config", p(&fixture("sufficiency_small.json")), "--out", p(&file.join("sub"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_three() {
    let o = run(&["capacity", "--channel", p(&fixture("z_channel.json")), "--max-iter", "1", "--tol", "1e-15"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn golden_stdout() {
    let mut text = String::new();
    for args in [
        vec!["capacity", "--channel", p(&fixture("bsc01.json"))],
        vec!["mi", "--joint", p(&fixture("joint_xor.json")), "--a", "x", "--b", "y", "--given", "z"],
        vec!["rd", "--source", p(&fixture("bernoulli_half.json")), "--at-distortion", "0.1"],
    ]
    .iter()
    .map(|v| v.iter().map(|s| s.to_string()).collect::<Vec<_>>())
    {
        let o = bin().args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        text.push_str(&stdout(&o));
    }
    assert_eq!(text, golden("stdout.txt"));
}

#[test]
fn golden_sweep_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "sufficiency", "--config", p(&fixture("sufficiency_small.json")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap();
    assert_eq!(read("results.csv"), golden("sufficiency_results.csv"));
    assert_eq!(read("plot_accuracy.csv"), golden("sufficiency_plot_accuracy.csv"));
}

#[test]
fn alpha_sweep_emits_three_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "alpha", "--config", p(&fixture("alpha_small.json")), "--out", p(dir.path()), "--parallel", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for m in ["accuracy", "alignment_error", "distortion_norm"] {
        let text = std::fs::read_to_string(dir.path().join(format!("plot_{m}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "param,mean,ci_lo,ci_hi");
        assert_eq!(lines.len(), 6);
        for l in &lines[1..] {
            assert!(l.split(',').all(|v| v.split('.').nth(1).is_some_and(|d| d.len() == 6)), "{l}");
        }
    }
}

#[test]
fn seed_environment_variable_overrides_config_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("sufficiency_small.json");
    let o = bin()
        .args(["sweep", "sufficiency", "--config", p(&cfg), "--out", p(dir.path())])
        .env("HBI_LAB_SEED", "40")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let seeds: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds.into_iter().collect::<Vec<_>>(), ["40", "41"]);
}

#[test]
fn theorem_suite_writes_six_satisfied_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["theorems", "run-all", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "reports=6 satisfied=6");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 6);
    assert!(arr.iter().all(|r| r["satisfied"] == true));
}

#[test]
fn ingest_check_reports_counts_and_bad_lines() {
    let o = run(&["ingest-check", p(&fixture("scores_valid.jsonl"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("pairs=2 errors=0"));
    assert!(stdout(&o).contains("s_a_a=2"));
    let o = run(&["ingest-check", p(&fixture("scores_bad.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("pairs=2 errors=1"));
    let o = run(&["ingest-check", "--strict", p(&fixture("scores_bad.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn killed_sweeps_never_leave_partial_files() {
    let cfg = fixture("alpha_small.json");
    let reference = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "alpha", "--config", p(&cfg), "--out", p(reference.path())]);
    assert_eq!(o.status.code(), Some(0));
    for delay_ms in [0u64, 20, 60, 150, 400] {
        let dir = tempfile::tempdir().unwrap();
        let mut child = bin()
            .args(["sweep", "alpha", "--config", p(&cfg), "--out", p(dir.path())])
            .stdout(std::process::Stdio::null())
            .spawn()
            .unwrap();
        std::thread::sleep(Duration::from_millis(delay_ms));
        let _ = child.kill();
        let _ = child.wait();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            if name.starts_with(".tmp") {
                continue;
            }
            let want = std::fs::read(reference.path().join(&name)).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), want, "{name} partially written after {delay_ms} ms");
        }
    }
}
