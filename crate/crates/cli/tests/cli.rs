use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qha-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QHA_LAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gap_prints_twelve_digit_constants() {
    let dir = TempDir::new().unwrap();
    let o = run(&["gap", "--d", "1", "--p", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("C_2^2=0.500000000000"), "{text}");
    assert!(text.contains("m_1=0.632120558829"), "{text}");
    assert_eq!(text.matches("certified-gap").count(), 5, "{text}");
    let csv = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("d,p,R,x,A_d,F_d,C_p^p,verdict"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn oracle_residuals_are_tiny() {
    let dir = TempDir::new().unwrap();
    let o = run(&["oracle", "--n", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("oracle.json")).unwrap()).unwrap();
    let residuals = report["residuals"].as_array().unwrap();
    assert_eq!(residuals.len(), 9);
    assert!(residuals
        .iter()
        .all(|r| r["residual"].as_f64().unwrap() <= 1e-10));
}

#[test]
fn zero_window_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&["optimize", "--window", "zero", "--n", "16"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("window is zero"));
}

#[test]
fn unknown_command_and_bad_config_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["shearlet"], dir.path()).status.code(), Some(2));

    let missing = dir.path().join("missing.toml");
    let o = run(&["gap", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unreadable"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "colour = 1\n").unwrap();
    let o = run(&["gap", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));

    let o = run(&["optimize", "--n", "7"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"), "{}", stderr(&o));

    let o = run(&["experiment", "shearlet"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown experiment `shearlet`"));
}

#[test]
fn invalid_worker_variable_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qha-lab"))
        .args(["gap", "--out", dir.path().to_str().unwrap()])
        .env("QHA_LAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("QHA_LAB_WORKERS"));
}

#[test]
fn optimize_reports_are_deterministic() {
    let (first, second) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = [
        "optimize",
        "--n",
        "32",
        "--seed",
        "3",
        "--strict-gap",
        "--workers",
        "2",
    ];
    assert_eq!(run(&args, first.path()).status.code(), Some(0));
    assert_eq!(run(&args, second.path()).status.code(), Some(0));
    for file in ["optimize.json", "optimizer.json"] {
        let a = fs::read(first.path().join(file)).unwrap();
        let b = fs::read(second.path().join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(first.path().join("optimize.json")).unwrap()).unwrap();
    assert_eq!(report["optimizer_file"], "optimizer.json");
    assert_eq!(report["inputs"]["n"], 32);
    let optimizer =
        qha_lab::io::read_signal(fs::File::open(first.path().join("optimizer.json")).unwrap())
            .unwrap();
    assert!((optimizer.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        "command = \"optimize\"\np = 1.0\n[grid]\nn = 16\nmode = \"exact\"\n[window]\nkind = \"wigner\"\n[region]\nkind = \"ball\"\ncenter = [0.0, 0.0]\nradius = 2.0\n",
    )
    .unwrap();
    let o = run(
        &[
            "optimize",
            "--config",
            config.to_str().unwrap(),
            "--n",
            "32",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("optimize.json")).unwrap()).unwrap();
    assert_eq!(report["inputs"]["n"], 32);
    assert_eq!(report["inputs"]["mode"], "exact");
    assert_eq!(report["inputs"]["p"], 1.0);

    let o = run(&["gap", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`command`"));
}

#[test]
fn transform_writes_long_form_csv() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "transform",
            "--kind",
            "ambiguity",
            "--n",
            "8",
            "--mode",
            "exact",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("transform.csv")).unwrap();
    assert!(csv.starts_with("m,k,re,im\n"));
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn op_optimize_density_writes_report() {
    let dir = TempDir::new().unwrap();
    let window = r#"{"kind": "rank-one", "g": {"kind": "gaussian"}, "h": {"kind": "gaussian"}}"#;
    let o = run(
        &[
            "op-optimize",
            "--class",
            "density",
            "--n",
            "16",
            "--window",
            window,
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("op-optimize.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["class"], "density");
    let o = run(&["op-optimize", "--class", "diamond"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_failure_exits_one_and_keeps_report() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("affine.toml");
    fs::write(&config, "[experiment.affine]\nn_seq = 5\n").unwrap();
    let o = run(
        &[
            "experiment",
            "affine-autovoice",
            "--config",
            config.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL affine-autovoice"));
    assert!(dir.path().join("affine-autovoice.json").exists());
    assert!(dir.path().join("experiments.csv").exists());

    let o = run(
        &["experiment", "affine-autovoice", "born-jordan-msech"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 2);
}
