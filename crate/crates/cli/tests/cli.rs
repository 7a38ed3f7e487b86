//! End-to-end checks of the command-line contract: exit codes, file
//! outputs, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ipsflow")
}

fn repo_model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ipsflow-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn check_attractive_two_species() {
    let model = repo_model("two-species.toml");
    let out = run(&["check", "--attractive", "-m", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("closed-form attractiveness: HOLDS"));
    assert!(text.contains("general conditions: HOLD"));
}

#[test]
fn check_non_attractive_exits_one_with_certificate() {
    let dir = tmp_dir("badts");
    let path = dir.join("bad.toml");
    std::fs::write(
        &path,
        r#"
family = "two-species-exclusion"
[params]
rates = ["1", "1", "1/2", "3/2", "1"]
"#,
    )
    .unwrap();
    let out = run(&["check", "--attractive", "-m", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("certificate: condition (c"), "{text}");
}

#[test]
fn check_accepts_a_wider_radius() {
    let model = repo_model("two-species.toml");
    let out = run(&[
        "check",
        "--attractive",
        "-m",
        model.to_str().unwrap(),
        "--radius",
        "2",
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
}

#[test]
fn batch_and_exclusion_model_files_check() {
    let out = run(&["check", "--attractive", "-m", repo_model("gs-batch.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // the exclusion example is deliberately not attractive; both the
    // closed-form and the general route certify it
    let out = run(&[
        "check",
        "--attractive",
        "-m",
        repo_model("exclusion-4.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("closed-form attractiveness: FAILS"));
    assert!(text.contains("certificate: condition (c"));
}

#[test]
fn missing_model_file_exits_two() {
    let out = run(&["check", "--attractive", "-m", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_model_file_exits_two() {
    let dir = tmp_dir("malformed");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "family = \"two-species-exclusion\"\n").unwrap();
    let out = run(&["check", "--attractive", "-m", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn couple_writes_table_that_revalidates() {
    let dir = tmp_dir("couple");
    let table = dir.join("table.csv");
    let model = repo_model("two-species.toml");
    let out = run(&[
        "couple",
        "-m",
        model.to_str().unwrap(),
        "--eta",
        "0,2,0,1,2",
        "--xi",
        "1,2,1,1,2",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("effect1,effect2,rate,term\n"));
    assert!(text.contains("genx") || text.contains("gen4"));

    // the written table re-parses and passes the validators it can run
    let out = run(&[
        "couple",
        "-m",
        model.to_str().unwrap(),
        "--eta",
        "0,2,0,1,2",
        "--xi",
        "1,2,1,1,2",
        "--validate-only",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
}

#[test]
fn validate_only_accepts_published_coupled_rows() {
    // the three published coupled rows for the worked window, as a table
    let dir = tmp_dir("published");
    let table = dir.join("published.csv");
    std::fs::write(
        &table,
        "effect1,effect2,rate,term\n\
         mig:-1:0:2:2,mig:-1:0:1:1,1,genx\n\
         mig:-1:0:1:1,mig:-1:0:1:1,1/2,gen4\n\
         mig:1:0:1:1,mig:1:0:1:1,1,gen4\n",
    )
    .unwrap();
    let model = repo_model("two-species.toml");
    let out = run(&[
        "couple",
        "-m",
        model.to_str().unwrap(),
        "--eta",
        "0,2,0,1,2",
        "--xi",
        "1,2,1,1,2",
        "--validate-only",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // an uncoupled lower move that overshoots the upper window breaks the
    // order validator
    std::fs::write(
        &table,
        "effect1,effect2,rate,term\n\
         mig:-1:0:2:2,-,1,gen2\n",
    )
    .unwrap();
    let out = run(&[
        "couple",
        "-m",
        model.to_str().unwrap(),
        "--eta",
        "0,2,0,1,2",
        "--xi",
        "1,2,1,1,2",
        "--validate-only",
        table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
}

#[test]
fn equal_windows_couple_into_identity_pairs() {
    let model = repo_model("two-species.toml");
    let out = run(&[
        "couple",
        "-m",
        model.to_str().unwrap(),
        "--eta",
        "1,2,0,1,2",
        "--xi",
        "1,2,0,1,2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] != "-" && fields[1] != "-" {
            assert_eq!(fields[0], fields[1], "coupled rows must move in lockstep: {line}");
        }
    }
}

#[test]
fn couple_rejects_unordered_windows() {
    let model = repo_model("two-species.toml");
    let out = run(&[
        "couple",
        "-m",
        model.to_str().unwrap(),
        "--eta",
        "1,2,1,1,2",
        "--xi",
        "0,2,0,1,2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tmp_dir("sim");
    let model = repo_model("two-species.toml");
    let mut logs = Vec::new();
    for run_idx in 0..2 {
        let prefix = dir.join(format!("run{run_idx}"));
        let out = run(&[
            "simulate",
            "-m",
            model.to_str().unwrap(),
            "-L",
            "8",
            "-T",
            "5",
            "--seed",
            "42",
            "--init1",
            "1,2,0,1,0,2,1,0",
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        logs.push(std::fs::read(prefix.with_extension("events.csv")).unwrap());
    }
    assert_eq!(logs[0], logs[1], "same seed must give identical trajectories");

    let other = dir.join("other");
    let out = run(&[
        "simulate",
        "-m",
        model.to_str().unwrap(),
        "-L",
        "8",
        "-T",
        "5",
        "--seed",
        "43",
        "--init1",
        "1,2,0,1,0,2,1,0",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let third = std::fs::read(other.with_extension("events.csv")).unwrap();
    assert_ne!(logs[0], third, "different seeds must differ");
}

#[test]
fn coupled_simulation_with_injection_exits_one() {
    let model = repo_model("two-species.toml");
    let out = run(&[
        "simulate",
        "-m",
        model.to_str().unwrap(),
        "-m",
        model.to_str().unwrap(),
        "-L",
        "8",
        "-T",
        "5",
        "--seed",
        "7",
        "--init1",
        "1,2,0,1,0,2,1,0",
        "--init2",
        "1,2,0,1,0,2,1,0",
        "--inject-violation",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("order violation"), "{err}");
}

#[test]
fn noncomparable_pair_refused_without_force() {
    let lower = repo_model("noncons-lower.toml");
    let dir = tmp_dir("noncomp");
    // an upper model whose conservative hops outpace the lower process
    let upper = dir.join("upper.toml");
    std::fs::write(
        &upper,
        r#"
family = "custom-table"
N = 5
k_max = 2
l_max = 2

[[params.entry]]
change = "arr:0:1"
rate = "2"

[[params.entry]]
change = "arr:0:2"
rate = "4"

[[params.entry]]
change = "dep:0:1"
rate = "1"

[[params.entry]]
change = "dep:0:2"
rate = "1"

[[params.entry]]
change = "mig:0:1:1:1"
rate = "3"

[[params.entry]]
change = "mig:0:-1:1:1"
rate = "3"
"#,
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "-m",
        lower.to_str().unwrap(),
        "-m",
        upper.to_str().unwrap(),
        "-L",
        "8",
        "-T",
        "1",
        "--seed",
        "1",
        "--init1",
        "1",
        "--init2",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not comparable"), "{err}");
}

#[test]
fn reproduce_both_examples() {
    for example in ["two-species", "nonconservative"] {
        let out = run(&["reproduce", "--example", example]);
        assert_eq!(out.status.code(), Some(0), "{example}: {out:?}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("ALL CHECKS PASS"), "{example}: {text}");
        assert!(text.contains("published coupled rows at the centre: PASS"));
    }
    let out = run(&["reproduce", "--example", "unknown"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_report_is_line_stable() {
    let a = run(&["reproduce", "--example", "nonconservative"]);
    let b = run(&["reproduce", "--example", "nonconservative"]);
    assert_eq!(a.stdout, b.stdout);
}
