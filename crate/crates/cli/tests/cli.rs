use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aac_cli::config::RunConfig;
use aac_core::presets;
use aac_core::TrajectoryLog;

fn aac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.config");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn bundled_configs_match_the_presets() {
    for (file, name) in [
        ("scalar_oracle.config", "scalar"),
        ("wmr_paper.config", "wmr"),
        ("ibvs_paper.config", "ibvs"),
    ] {
        let cfg = RunConfig::parse(&fs::read_to_string(bundled(file)).unwrap()).unwrap();
        assert_eq!(cfg.scenario, presets::by_name(name).unwrap(), "{file}");
    }
}

#[test]
fn run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "plant = wmr\nsim.t_final = 2\n");
    let out = tmp.path().join("out");
    let res = aac(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["trajectory.csv", "summary.json", "effective.config"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for f in [
        "error_norms",
        "control_norms",
        "value",
        "parameter_estimates",
        "critic_weights",
        "actor_weights",
    ] {
        let text = fs::read_to_string(out.join("plotdata").join(format!("{f}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 202, "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["plant"], "wmr");
    assert_eq!(summary["counters"]["rate_evals"], 8000);
    let header = fs::read_to_string(out.join("plotdata/critic_weights.csv")).unwrap();
    assert!(header.starts_with("t,wc[x1^2],wc[x2^2],wc[x3^2],wc[x1*x2],wc[x2*x3],wc[x1*x3]\n"));
}

#[test]
fn effective_config_reproduces_the_run_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "plant = wmr\nsim.t_final = 1.5\ngains.k_cl = 20\nwmr.x0 = [1, -1, pi/3]\n",
    );
    let first = tmp.path().join("a");
    let second = tmp.path().join("b");
    assert_eq!(
        aac(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            first.to_str().unwrap()
        ])
        .status
        .code(),
        Some(0)
    );
    let effective = first.join("effective.config");
    assert_eq!(
        aac(&[
            "run",
            "--config",
            effective.to_str().unwrap(),
            "--out",
            second.to_str().unwrap()
        ])
        .status
        .code(),
        Some(0)
    );
    let a = fs::read(first.join("trajectory.csv")).unwrap();
    let b = fs::read(second.join("trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let log = TrajectoryLog::read_csv(std::io::Cursor::new(a)).unwrap();
    assert_eq!(log.rows.last().unwrap().t, 1.5);
}

#[test]
fn config_errors_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "plant = wmr\n\ngains.gama_c = 3\n");
    let out = tmp.path().join("out");
    let res = aac(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3") && err.contains("gains.gama_c"), "{err}");
    assert!(!out.exists());

    let missing = aac(&["run", "--config", tmp.path().join("nope.config").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn fault_exits_3_with_partial_log() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "plant = scalar\ngains.gamma = 1e7\n");
    let out = tmp.path().join("out");
    let res = aac(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let log = TrajectoryLog::read_csv(std::io::BufReader::new(
        fs::File::open(out.join("trajectory.csv")).unwrap(),
    ))
    .unwrap();
    assert!(!log.is_empty());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "fault");
}

#[test]
fn verify_suites() {
    for suite in ["algebra", "basis", "gamma", "projection", "cl-envelope", "oracle"] {
        let res = aac(&["verify", "--suite", suite]);
        let text = String::from_utf8_lossy(&res.stdout);
        assert_eq!(res.status.code(), Some(0), "{text}");
        assert!(text.contains("[PASS]") && !text.contains("[FAIL]"), "{text}");
    }
    assert_eq!(aac(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
}

#[test]
fn sweep_runs_each_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "plant = scalar\nsim.t_final = 1\n");
    let out = tmp.path().join("sweep");
    let res = aac(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "gains.gamma_c=1,5,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("gains.gamma_c,status,"));
    for v in ["1.0", "5.0", "10.0"] {
        assert!(out.join(format!("gains.gamma_c={v}")).join("trajectory.csv").is_file());
    }

    let empty = aac(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "gains.gamma_c=",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(empty.status.code(), Some(2));
    let wrong = aac(&["sweep", "--config", cfg.to_str().unwrap(), "--sweep", "wmr.a=1,2"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn preset_prints_a_loadable_config() {
    let res = aac(&["preset", "ibvs"]);
    assert_eq!(res.status.code(), Some(0));
    let cfg = RunConfig::parse(&String::from_utf8(res.stdout).unwrap()).unwrap();
    assert_eq!(cfg.scenario, presets::ibvs_paper());
    assert_eq!(aac(&["preset", "boat"]).status.code(), Some(2));
}
