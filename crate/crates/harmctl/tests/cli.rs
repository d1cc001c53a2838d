//! End-to-end tests of the `harmctl` binary: exit codes, structured errors,
//! deterministic outputs, and the file formats behind each subcommand.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn harmctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmctl"))
        .args(args)
        .env_remove("HARMCTL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_fixture_csvs(dir: &Path) -> (String, String) {
    let scores = "\
instance_id,noise,a,b,c
i0,110,0.7,0.2,0.1
i1,110,0.5,0.4,0.1
i2,110,0.3,0.45,0.25
i3,110,0.8,0.15,0.05
i4,110,0.35,0.33,0.32
i5,110,0.6,0.25,0.15
i6,110,0.45,0.3,0.25
i7,110,0.55,0.35,0.1
i8,110,0.25,0.5,0.25
i9,110,0.65,0.2,0.15
";
    let mut humans = String::from("instance_id,participant_id,true_label,prediction\n");
    let truths = ["a", "b", "b", "a", "c", "a", "a", "b", "b", "a"];
    for (i, truth) in truths.iter().enumerate() {
        for p in 0..3 {
            // Participant 2 errs on every odd instance.
            let pred = if p == 2 && i % 2 == 1 {
                if *truth == "a" { "b" } else { "a" }
            } else {
                truth
            };
            humans.push_str(&format!("i{i},p{p},{truth},{pred}\n"));
        }
    }
    let scores_path = dir.join("scores.csv");
    let humans_path = dir.join("humans.csv");
    fs::write(&scores_path, scores).unwrap();
    fs::write(&humans_path, &humans).unwrap();
    (
        scores_path.to_string_lossy().into_owned(),
        humans_path.to_string_lossy().into_owned(),
    )
}

#[test]
fn calibrate_on_csv_data() {
    let dir = tempfile::tempdir().unwrap();
    let (scores, humans) = write_fixture_csvs(dir.path());
    let out = harmctl(&[
        "calibrate",
        "--scores",
        &scores,
        "--humans",
        &humans,
        "--alpha",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["mode"], "counterfactual");
    assert_eq!(result["feasible"], true);
    assert_eq!(result["upper"], 1.0);
}

#[test]
fn calibrate_alpha_too_small_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (scores, humans) = write_fixture_csvs(dir.path());
    // n = 30 samples, so alpha below 1/31 is unachievable.
    let out = harmctl(&[
        "calibrate",
        "--scores",
        &scores,
        "--humans",
        &humans,
        "--alpha",
        "0.001",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&out).lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["kind"], "alpha_too_small");
}

#[test]
fn calibrate_missing_alpha_exits_1() {
    let out = harmctl(&["calibrate", "--synthetic"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_str(stderr(&out).lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["kind"], "config_invalid");
}

#[test]
fn calibrate_missing_file_exits_3() {
    let out = harmctl(&[
        "calibrate",
        "--scores",
        "/nonexistent/scores.csv",
        "--humans",
        "/nonexistent/humans.csv",
        "--alpha",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn calibrate_interventional_auto_alpha_prime() {
    let out = harmctl(&[
        "calibrate",
        "--synthetic",
        "--regime",
        "interv",
        "--n-instances",
        "300",
        "--alpha",
        "0.25",
        "--mode",
        "interventional",
        "--auto-alpha-prime",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["mode"], "interventional");
    assert!(result["alpha_prime"].as_f64().unwrap() > 0.0);
    assert!(result["feasible"].as_bool().unwrap());
}

#[test]
fn tradeoff_writes_deterministic_files() {
    let run = |dir: &Path| {
        let out = harmctl(&[
            "tradeoff",
            "--synthetic",
            "--n-instances",
            "150",
            "--n-experts",
            "3",
            "--alpha",
            "0.1",
            "--repetitions",
            "3",
            "--calib-frac",
            "0.2",
            "--lambda-step",
            "0.05",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        (
            fs::read_to_string(dir.join("tradeoff.csv")).unwrap(),
            fs::read_to_string(dir.join("report.json")).unwrap(),
        )
    };
    // Rerun into the same directory: equal configs (including the output
    // path) must reproduce both files byte for byte.
    let dir = tempfile::tempdir().unwrap();
    let (csv1, report1) = run(dir.path());
    let (csv2, report2) = run(dir.path());
    assert_eq!(csv1, csv2, "reruns with equal configs must be byte-identical");
    assert_eq!(report1, report2);

    // 0..1 step 0.05 inclusive plus the header.
    assert_eq!(csv1.lines().count(), 22);
    let header = csv1.lines().next().unwrap();
    assert!(header.starts_with("lambda,accuracy_mean,accuracy_ci,harm_mean"));
    let report: serde_json::Value = serde_json::from_str(&report1).unwrap();
    assert_eq!(report["command"], "tradeoff");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["alpha"], 0.1);
}

#[test]
fn tradeoff_single_repetition_leaves_ci_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = harmctl(&[
        "tradeoff",
        "--synthetic",
        "--n-instances",
        "100",
        "--alpha",
        "0.2",
        "--repetitions",
        "1",
        "--lambda-step",
        "0.25",
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], "", "accuracy_ci must be empty with one repetition");
        assert_eq!(fields[4], "", "harm_ci must be empty with one repetition");
    }
}

#[test]
fn risk_csv_has_curve_columns() {
    let out = harmctl(&[
        "risk",
        "--synthetic",
        "--n-instances",
        "80",
        "--lambda-step",
        "0.1",
        "--seed",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,H_hat,G_hat,lower,upper"));
    let last = text.lines().last().unwrap();
    let fields: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields[0], 1.0);
    assert_eq!(fields[1], 0.0, "harm vanishes at the domain maximum");
    assert!((fields[4] - fields[3] - fields[2]).abs() < 1e-12);
}

#[test]
fn accuracy_and_coverage_emit_grids() {
    for (cmd, header) in [
        ("accuracy", "lambda,A"),
        ("coverage", "lambda,coverage,mean_set_size"),
    ] {
        let out = harmctl(&[
            cmd,
            "--synthetic",
            "--n-instances",
            "80",
            "--lambda-step",
            "0.2",
            "--seed",
            "4",
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        let text = stdout(&out);
        assert_eq!(text.lines().next(), Some(header));
        assert_eq!(text.lines().count(), 7);
    }
}

#[test]
fn fit_mnl_dumps_row_stochastic_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let (scores, humans) = write_fixture_csvs(dir.path());
    let out = harmctl(&["fit-mnl", "--scores", &scores, "--humans", &humans]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let dump: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let matrices = dump["matrices"].as_array().unwrap();
    assert_eq!(matrices.len(), 2, "median cut gives two strata");
    for matrix in matrices {
        for row in matrix.as_array().unwrap() {
            let total: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "rows must be stochastic, got {total}");
        }
    }
}

#[test]
fn simulate_cf_reports_controlled_risk() {
    let out = harmctl(&[
        "simulate",
        "--regime",
        "cf",
        "--alpha",
        "0.1",
        "--reps",
        "20",
        "--n-calib",
        "200",
        "--n-test",
        "500",
        "--n-instances",
        "1000",
        "--seed",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["regime"], "cf");
    let mean = result["harm_control"]["mean_risk"].as_f64().unwrap();
    assert!(mean <= 0.1 + 0.05, "harm control far off: {mean}");
}

#[test]
fn simulate_interv_reports_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let out = harmctl(&[
        "simulate",
        "--regime",
        "interv",
        "--alpha",
        "0.25",
        "--reps",
        "5",
        "--n-calib",
        "200",
        "--n-instances",
        "500",
        "--lambda-step",
        "0.01",
        "--seed",
        "12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("simulate.json")).unwrap())
            .unwrap();
    assert_eq!(result["regime"], "interv");
    assert_eq!(result["interval_subset"]["violations"], 0);
    assert!(result["sandwich"]["max_upper_violation"].as_f64().unwrap() <= 1e-12);
    // The world dump for cross-checking sits next to the report.
    assert!(dir.path().join("world_scores.csv").exists());
    assert!(dir.path().join("world_humans.csv").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn verify_monotonicity_writes_cell_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = harmctl(&[
        "verify-monotonicity",
        "--synthetic",
        "--regime",
        "interv",
        "--n-instances",
        "300",
        "--seed",
        "13",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(summary["cells"].as_u64().unwrap() > 0);
    let mono = dir.path().join("monotonicity");
    let files: Vec<_> = fs::read_dir(&mono).unwrap().collect();
    assert!(!files.is_empty(), "cell CSV files must be written");
    let first = files[0].as_ref().unwrap().path();
    let text = fs::read_to_string(first).unwrap();
    assert!(text.starts_with("set_size,count,success_rate,standard_error"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    fs::write(
        &config_path,
        r#"{"synthetic": true, "n_instances": 100, "alpha": 0.5, "seed": 3}"#,
    )
    .unwrap();
    // The flag overrides the file's alpha = 0.5.
    let out = harmctl(&[
        "calibrate",
        "--config",
        config_path.to_str().unwrap(),
        "--alpha",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["alpha"], 0.9);
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    fs::write(&config_path, r#"{"alphaa": 0.5}"#).unwrap();
    let out = harmctl(&["calibrate", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_env_fallback() {
    let run = |env_seed: Option<&str>, dir: &Path| -> serde_json::Value {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_harmctl"));
        cmd.args([
            "calibrate",
            "--synthetic",
            "--n-instances",
            "120",
            "--alpha",
            "0.2",
            "--out",
            dir.to_str().unwrap(),
        ]);
        cmd.env_remove("HARMCTL_SEED");
        if let Some(seed) = env_seed {
            cmd.env("HARMCTL_SEED", seed);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
    };
    let dir = tempfile::tempdir().unwrap();
    let with_env = run(Some("99"), dir.path());
    assert_eq!(with_env["seed"], 99, "the env seed must reach the resolved config");
    let default = run(None, dir.path());
    assert_eq!(default["seed"], 0, "without a seed source the default applies");
}

#[test]
fn unknown_flag_exits_1() {
    let out = harmctl(&["calibrate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn saps_predictor_over_cli() {
    let out = harmctl(&[
        "coverage",
        "--synthetic",
        "--n-instances",
        "60",
        "--predictor",
        "saps",
        "--lambda-step",
        "0.625",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    let fields: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields[0], 6.25, "SAPS domain reaches lambda_max");
    assert_eq!(fields[1], 1.0, "full coverage at the domain maximum");
}
