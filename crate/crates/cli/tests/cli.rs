use std::path::{Path, PathBuf};
use std::process::Command;

use jumpflow_cli::config::{Experiment, RunConfig};
use jumpflow_cli::manifest::{RunManifest, MANIFEST_FILE};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn jumpflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_jumpflow"))
        .args(args)
        .env("JUMPFLOW_THREADS", "1")
        .output()
        .unwrap()
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let config = RunConfig::read(&path).unwrap();
        assert_eq!(RunConfig::parse(&config.to_json().unwrap()).unwrap(), config, "{}", path.display());
        n += 1;
    }
    assert_eq!(n, 9);
}

#[test]
fn unknown_version_is_rejected() {
    let text = std::fs::read_to_string(configs_dir().join("symbol_check.json")).unwrap();
    let err = RunConfig::parse(&text.replacen("\"version\": 1", "\"version\": 2", 1)).unwrap_err();
    assert!(format!("{err:#}").contains("version 2"));
}

#[test]
fn symbol_check_runs_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = configs_dir().join("symbol_check.json");
    let o = jumpflow(&["symbol-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS small_jump_moment"), "{stdout}");
    let manifest = out.join(MANIFEST_FILE);
    let m = RunManifest::read(&manifest).unwrap();
    assert!(matches!(m.config.experiment, Experiment::SymbolCheck(_)));
    assert_eq!(m.outputs.len(), 1);

    let again = tmp.path().join("again");
    let o = jumpflow(&["replay", "--manifest", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay identical"));
    assert_eq!(std::fs::read(&manifest).unwrap(), std::fs::read(again.join(MANIFEST_FILE)).unwrap());
}

#[test]
fn failing_gate_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs_dir().join("symbol_check.json")).unwrap();
    let mut config = RunConfig::parse(&text).unwrap();
    if let Experiment::SymbolCheck(c) = &mut config.experiment {
        c.expected_moment = Some((1.5, 3.0));
    }
    let cfg = tmp.path().join("wrong.json");
    std::fs::write(&cfg, config.to_json().unwrap()).unwrap();
    let out = tmp.path().join("run");
    let o = jumpflow(&["symbol-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL small_jump_moment"));
}

#[test]
fn mismatched_subcommand_and_bad_config_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = configs_dir().join("symbol_check.json");
    let o = jumpflow(&["flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("symbol-check"));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1, \"seed\": 0, \"experiment\": \"flow\"}").unwrap();
    let o = jumpflow(&["flow", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
