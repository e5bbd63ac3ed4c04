use std::path::Path;
use std::process::{Command, Output};

use fbmsde::fbm::sample_path;
use fbmsde::io::{read_path_csv, read_table};
use fbmsde::{HurstParameter, SamplerKind, UniformGrid};

fn fbmsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbmsde")).args(args).env_remove("FBMSDE_THREADS").output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn table(out: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    assert!(out.status.success(), "{}", stderr(out));
    read_table(out.stdout.as_slice()).unwrap()
}

#[test]
fn sample_grid_and_config_line() {
    let out = fbmsde(&["sample", "--hurst", "0.7", "--steps", "8", "--dim", "2", "--seed", "1"]);
    let text = stdout(&out);
    assert!(text.starts_with("# config: {"));
    assert!(text.contains("\"seed\":1") && text.contains("\"hurst\":0.7"));
    let (header, rows) = table(&out);
    assert_eq!(header, ["t", "X1", "X2"]);
    assert_eq!(rows.len(), 9);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k as f64 * 0.125);
        assert_eq!(row[1], row[0]);
    }
    assert_eq!(rows[0][2], 0.0);
}

#[test]
fn sample_files_are_byte_identical_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for f in [&a, &b] {
        let out = fbmsde(&[
            "sample",
            "--hurst",
            "0.7",
            "--steps",
            "64",
            "--dim",
            "3",
            "--seed",
            "5",
            "--out",
            f.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let hurst = HurstParameter::new(0.7).unwrap();
    let expect = sample_path(SamplerKind::Circulant, UniformGrid::new(1.0, 64).unwrap(), 3, hurst, 5).unwrap();
    let back = read_path_csv(bytes.as_slice(), hurst, expect.seed_record()).unwrap();
    assert_eq!(back, expect);
}

#[test]
fn sample_time_only() {
    let (header, rows) = table(&fbmsde(&["sample", "--hurst", "0.6", "--steps", "4", "--dim", "1"]));
    assert_eq!(header, ["t", "X1"]);
    assert!(rows.iter().all(|r| r[0] == r[1]));
}

#[test]
fn sample_cholesky_matches_library() {
    let (_, rows) =
        table(&fbmsde(&["sample", "--hurst", "0.8", "--steps", "16", "--sampler", "cholesky", "--seed", "9"]));
    let hurst = HurstParameter::new(0.8).unwrap();
    let path = sample_path(SamplerKind::Cholesky, UniformGrid::new(1.0, 16).unwrap(), 2, hurst, 9).unwrap();
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[2].to_bits(), path.value(k, 1).to_bits());
    }
}

fn check_tableau(spec: &str) -> bool {
    let out = fbmsde(&["check-tableau", "--tableau", spec, "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["tableau"], spec);
    v["report"]["satisfies_order_conditions"].as_bool().unwrap()
}

#[test]
fn check_tableau_builtins() {
    assert!(check_tableau("midpoint"));
    assert!(check_tableau("rk4"));
    assert!(check_tableau("heun"));
    assert!(!check_tableau("euler"));
}

#[test]
fn check_tableau_from_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ralston.json");
    std::fs::write(&file, r#"{"s": 2, "a": [[0, 0], [0.6666666666666666, 0]], "b": [0.25, 0.75], "name": "ralston"}"#)
        .unwrap();
    assert!(check_tableau(file.to_str().unwrap()));

    let out = fbmsde(&["check-tableau", "--tableau", "euler"]);
    let text = stdout(&out);
    let row = text.lines().last().unwrap();
    assert!(row.starts_with("euler,1,true,1,0,false,"), "{row}");

    let out = fbmsde(&["check-tableau", "--tableau", "no-such-tableau"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_paper5_midpoint() {
    let (header, rows) =
        table(&fbmsde(&["solve", "--problem", "paper5", "--scheme", "midpoint", "--hurst", "0.7", "--steps", "256"]));
    assert_eq!(header, ["t", "Y1"]);
    assert_eq!(rows.len(), 257);
    assert_eq!(rows[0][1], 5.0);
    assert!(rows.iter().all(|r| r[1].is_finite()));
}

#[test]
fn solve_zero_field_is_constant() {
    let (_, rows) = table(&fbmsde(&[
        "solve",
        "--problem",
        "linear1d:a=0,y0=2",
        "--scheme",
        "rk4",
        "--hurst",
        "0.7",
        "--steps",
        "32",
    ]));
    assert!(rows.iter().all(|r| r[1] == 2.0));
}

#[test]
fn solve_json_embeds_config() {
    let out =
        fbmsde(&["solve", "--scheme", "step2", "--hurst", "0.75", "--steps", "8", "--seed", "4", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["scheme"], "step2");
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["trajectory"]["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn solve_rejects_unknown_scheme() {
    let out = fbmsde(&["solve", "--scheme", "rk5", "--hurst", "0.7", "--steps", "8"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    for name in ["euler", "heun", "midpoint", "rk4", "step2"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn solve_nonconvergence_exit_code() {
    let out = fbmsde(&["solve", "--scheme", "midpoint", "--hurst", "0.7", "--steps", "4", "--fp-max-iter", "1"]);
    assert_eq!(out.status.code(), Some(5), "{}", stderr(&out));
}

#[test]
fn converge_needs_three_levels() {
    let out = fbmsde(&["converge", "--levels", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("at least 3 levels"));
}

#[test]
fn converge_two_paths_flags_stderr() {
    let out = fbmsde(&["converge", "--paths", "2", "--levels", "3..5", "--ref-level", "8", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["high_slope_stderr"], true);
    assert_eq!(v["report"]["paths"], 2);
    assert_eq!(v["config"]["levels"], serde_json::json!([8, 16, 32]));
    assert!((v["report"]["target_rate"].as_f64().unwrap() - 1.1).abs() < 1e-12);
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn converge_is_independent_of_thread_count() {
    let args = ["converge", "--paths", "12", "--levels", "3,4,5", "--ref-level", "8", "--scheme", "rk4"];
    let one = Command::new(env!("CARGO_BIN_EXE_fbmsde")).args(args).env("FBMSDE_THREADS", "1").output().unwrap();
    let three = fbmsde(&[&args[..], &["--threads", "3"]].concat());
    assert!(one.status.success() && three.status.success());
    let strip = |o: &Output| stdout(o).lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&one), strip(&three));
    assert!(stdout(&one).contains("\"threads\":1"));
    assert!(stdout(&three).contains("\"threads\":3"));
}

#[test]
fn usage_and_io_exit_codes() {
    assert_eq!(fbmsde(&["sample", "--bogus"]).status.code(), Some(2));
    assert_eq!(fbmsde(&["sample", "--hurst", "0.7", "--steps", "0"]).status.code(), Some(3));
    let missing = Path::new("/nonexistent-dir/out.csv");
    let out = fbmsde(&["sample", "--hurst", "0.7", "--steps", "4", "--out", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(7));
    let help = stdout(&fbmsde(&["--help"]));
    assert!(help.contains("Exit codes") && help.contains("FBMSDE_THREADS"));
}
