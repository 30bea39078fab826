//! End-to-end checks of the binary: artifact files, exit codes, config
//! merging, and the reproduce pipeline at toy sizes.

use std::path::Path;
use std::process::{Command, Output};

fn tenseg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tenseg"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_writes_benchmark_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, members) in [("dbar", 6), ("prism", 12), ("lander", 30)] {
        let out = tenseg(&["gen", "--structure", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v = read_json(&dir.path().join(format!("{name}.json")));
        let bars = v["bars"].as_array().unwrap().len();
        let strings = v["strings"].as_array().unwrap().len();
        assert_eq!(bars + strings, members, "{name}");
    }
    let out = tenseg(
        &["gen", "--structure", "prism", "--radius", "0.3", "--height", "0.4"],
        dir.path(),
    );
    assert!(out.status.success());
}

#[test]
fn solve_reports_and_writes_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = tenseg(
        &["solve", "--structure", "dbar", "--dl", "-0.5,-0.5"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("converged"), "{text}");
    assert!(text.contains("first non-zero frequency"), "{text}");
    let state = read_json(&dir.path().join("state.json"));
    assert!(state["residual_norm"].as_f64().unwrap() <= 1e-6);
    assert_eq!(state["member_forces"].as_array().unwrap().len(), 6);
    assert!(dir.path().join("state_modal.json").exists());
}

#[test]
fn zero_actuation_means_zero_forces() {
    let dir = tempfile::tempdir().unwrap();
    let out = tenseg(&["solve", "--structure", "dbar", "--dl", "0,0"], dir.path());
    assert!(out.status.success());
    let state = read_json(&dir.path().join("state.json"));
    for f in state["member_forces"].as_array().unwrap() {
        assert!(f.as_f64().unwrap().abs() <= 1e-9);
    }
}

#[test]
fn non_convergence_exits_nonzero_with_residual() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"solver": {"max_iterations": 1}}"#).unwrap();
    let out = tenseg(
        &[
            "solve",
            "--structure",
            "dbar",
            "--dl",
            "-0.5,-0.5",
            "--config",
            config.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("residual"), "stderr: {err}");
}

#[test]
fn modal_counts_match_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out = tenseg(
        &["modal", "--structure", "prism", "--dl", "-0.1,-0.1,-0.1", "--shapes"],
        dir.path(),
    );
    assert!(out.status.success());
    let modal = read_json(&dir.path().join("modal.json"));
    assert_eq!(modal["zero_mode_count"].as_u64().unwrap(), 6);
    assert_eq!(modal["eigenvalues"].as_array().unwrap().len(), 18);
    assert_eq!(
        modal["nonzero_frequencies_rad_s"].as_array().unwrap().len(),
        12
    );
    assert_eq!(modal["mode_shapes"].as_array().unwrap().len(), 18);
}

#[test]
fn dataset_train_eval_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = tenseg(
        &["dataset", "--structure", "dbar", "--n", "40", "--seed", "5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("dbar_40.csv");
    assert!(csv.exists() && dir.path().join("dbar_40.meta.json").exists());

    // Same seed, second run: byte-identical dataset.
    let again = tempfile::tempdir().unwrap();
    let out = tenseg(
        &["dataset", "--structure", "dbar", "--n", "40", "--seed", "5"],
        again.path(),
    );
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&csv).unwrap(),
        std::fs::read(again.path().join("dbar_40.csv")).unwrap()
    );

    let out = tenseg(
        &[
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--hidden",
            "8,8",
            "--epochs",
            "3",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model_path = dir.path().join("model.json");
    let model = read_json(&model_path);
    assert_eq!(model["layer_dims"][1].as_u64().unwrap(), 8);
    assert_eq!(model["train_config"]["epochs"].as_u64().unwrap(), 3);

    for trials in ["1", "2"] {
        let out = tenseg(
            &[
                "eval",
                "--model",
                model_path.to_str().unwrap(),
                "--data",
                csv.to_str().unwrap(),
                "--trials",
                trials,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report = read_json(&dir.path().join("report.json"));
        assert_eq!(
            report["report"]["trials"].as_u64().unwrap(),
            trials.parse::<u64>().unwrap()
        );
        assert!(report["report"]["mse_total"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn reproduce_toy_study_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    // Sizes keep the 80% train split at or above the default batch of 32.
    let args = [
        "reproduce",
        "--experiment",
        "prism",
        "--sizes",
        "45,90",
        "--trials",
        "2",
        "--seed",
        "11",
    ];
    let out = tenseg(&args, &dir.path().join("a"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = tenseg(&args, &dir.path().join("b"));
    assert!(out.status.success());

    let mse_a = std::fs::read_to_string(dir.path().join("a/prism/mse_vs_samples.csv")).unwrap();
    let mse_b = std::fs::read_to_string(dir.path().join("b/prism/mse_vs_samples.csv")).unwrap();
    assert_eq!(mse_a, mse_b);

    let lines: Vec<&str> = mse_a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "size,mse_coords,mse_forces,mse_freqs");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("45,") && lines[2].starts_with("90,"));
    assert!(mse_a.lines().any(|l| l.starts_with("# ") && l.contains("seed=11")));

    let runtime =
        std::fs::read_to_string(dir.path().join("a/prism/runtime.csv")).unwrap();
    let rlines: Vec<&str> = runtime.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rlines[0], "size,train_s,test_s");
    assert_eq!(rlines.len(), 3);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("from_config");
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"seed": 9, "out_dir": {:?}, "train": {{"epochs": 2, "hidden": [4], "batch_size": 4}}}}"#,
            nested.to_str().unwrap()
        ),
    )
    .unwrap();

    // No --out-dir: the config's directory is used.
    let out = Command::new(env!("CARGO_BIN_EXE_tenseg"))
        .args([
            "dataset",
            "--structure",
            "dbar",
            "--n",
            "10",
            "--config",
            config.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = nested.join("dbar_10.csv");
    assert!(csv.exists());

    // Train picks the config's epochs/hidden without flags.
    let out = Command::new(env!("CARGO_BIN_EXE_tenseg"))
        .args([
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = read_json(&nested.join("model.json"));
    assert_eq!(model["layer_dims"].as_array().unwrap().len(), 3);
    assert_eq!(model["train_config"]["epochs"].as_u64().unwrap(), 2);
    assert_eq!(model["train_config"]["seed"].as_u64().unwrap(), 9);

    // An explicit --seed beats the config's.
    let out = Command::new(env!("CARGO_BIN_EXE_tenseg"))
        .args([
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "123",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let model = read_json(&nested.join("model.json"));
    assert_eq!(model["train_config"]["seed"].as_u64().unwrap(), 123);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"sede": 9}"#).unwrap();
    let out = tenseg(
        &["gen", "--structure", "dbar", "--config", config.to_str().unwrap()],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}
