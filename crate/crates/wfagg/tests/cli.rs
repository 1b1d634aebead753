//! The `wfagg` binary: exit statuses, output layout, config round trips and
//! sweep resumption.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_wfagg");

fn wfagg(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("WFAGG_OUT_DIR").output().expect("spawn wfagg")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = wfagg(&["run", "--preset", "smoke", "--weights", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["accuracy.csv", "r_squared.csv", "weights.csv", "summary.json", "config.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["nodes"], 8);
    let acc = std::fs::read_to_string(out.join("accuracy.csv")).unwrap();
    assert!(acc.starts_with("round,"), "{acc}");
    assert_eq!(acc.lines().count(), 1 + 4 * 8, "header plus rounds 0..=3 for 8 nodes");
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = wfagg(&["run", "--preset", "smoke", "--attack", "ipm-100", "--defense", "median", "--out", path(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = wfagg(&["run", "--config", path(&a.join("config.toml")), "--out", path(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["accuracy.csv", "r_squared.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_subcommand_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wfagg(&["config", "--preset", "robustness", "--tau", "0.5,0.25,0.25", "--rounds", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = tmp.path().join("cfg.toml");
    std::fs::write(&file, &o.stdout).unwrap();
    let again = wfagg(&["config", "--config", path(&file)]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(o.stdout, again.stdout);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("rounds = 4"), "{text}");
}

#[test]
fn out_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from-env");
    let o = Command::new(BIN)
        .args(["run", "--preset", "smoke", "--rounds", "1"])
        .env("WFAGG_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("summary.json").is_file());
}

#[test]
fn unusable_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let bad_file = tmp.path().join("bad.toml");
    std::fs::write(&bad_file, "version = 1\n[experiment]\nnodez = 3\n").unwrap();
    let missing = tmp.path().join("missing.toml");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["run", "--config", path(&bad_file)], "nodez"),
        (vec!["run", "--config", path(&missing)], "missing.toml"),
        (vec!["run", "--preset", "nope"], "nope"),
        (vec!["run", "--preset", "smoke", "--degree", "3"], "degree"),
        (vec!["run", "--preset", "smoke", "--malicious-ids", "1,x"], "malicious"),
        (vec!["run", "--preset", "smoke", "--malicious-ids", "99"], "malicious"),
        (vec!["run", "--preset", "smoke", "--mode", "mesh"], "mesh"),
        (vec!["run", "--preset", "smoke", "--tau", "1,2"], "tau"),
        (vec!["run", "--preset", "smoke", "--defense", "multi-krum", "--multikrum-m", "9"], "defense"),
        (vec!["sweep", "--preset", "smoke", "--attacks", "teleport"], "teleport"),
        (vec!["verify", "--cases", "0"], "cases"),
    ];
    for (mut args, needle) in cases {
        if args[0] != "verify" {
            args.extend(["--out", path(&out)]);
        }
        let o = wfagg(&args);
        let err = stderr(&o);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    assert!(!out.exists());
}

#[test]
fn verify_subset_passes() {
    let o = wfagg(&["verify", "--fast", "--cases", "20", "--only", "krum,ipm"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}{}", stderr(&o));
    assert!(text.contains("krum-scores-vs-oracle") && text.contains("ipm-direction"), "{text}");
    assert!(!text.contains("gradient"), "{text}");
}

#[test]
fn sweep_resumes_and_reruns_changed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let args = [
        "sweep",
        "--preset",
        "smoke",
        "--rounds",
        "2",
        "--defenses",
        "mean,wfagg",
        "--attacks",
        "none,noise",
        "--modes",
        "central,decentral",
        "--out",
        path(&out),
    ];
    let first = wfagg(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(stderr(&first).matches(" ran ").count(), 8, "{}", stderr(&first));
    let table = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 4, "{table}");
    let sweep = std::fs::read(out.join("sweep.csv")).unwrap();

    let again = wfagg(&args);
    assert!(again.status.success());
    assert_eq!(stderr(&again).matches(" resumed ").count(), 8, "{}", stderr(&again));
    assert_eq!(std::fs::read(out.join("sweep.csv")).unwrap(), sweep);

    std::fs::remove_file(out.join("cells").join("decentral_wfagg_noise.json")).unwrap();
    std::fs::write(out.join("cells").join("central_mean_none.json"), b"{ truncated").unwrap();
    let third = wfagg(&args);
    assert!(third.status.success());
    assert_eq!(stderr(&third).matches(" ran ").count(), 2, "{}", stderr(&third));
    assert_eq!(std::fs::read(out.join("sweep.csv")).unwrap(), sweep);

    let mut changed = args.to_vec();
    changed[4] = "3";
    let fourth = wfagg(&changed);
    assert!(fourth.status.success());
    assert_eq!(stderr(&fourth).matches(" ran ").count(), 8, "{}", stderr(&fourth));
}

#[test]
fn failing_sweep_cells_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = wfagg(&[
        "sweep", "--preset", "smoke", "--rounds", "1", "--defenses", "mean,krum", "--krum-f", "3", "--attacks", "none", "--modes",
        "decentral", "--out", path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("decentral,krum,none") && l.contains("Krum")), "{csv}");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let robustness = wfagg::config::FileConfig::load(&dir.join("robustness.toml")).unwrap();
    assert_eq!(robustness.experiment, wfagg::presets::robustness());
    assert_eq!(robustness.sweep, wfagg::config::FileConfig::default().sweep);
    let krum = wfagg::config::FileConfig::load(&dir.join("ipm-vs-krum.toml")).unwrap();
    krum.experiment.validate().unwrap();
}
