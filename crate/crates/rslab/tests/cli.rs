use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn rslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rslab"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn run_writes_record_and_exits_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = rslab()
        .args(["run", config("quick.toml").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("verdict: pass"));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("runrecord.json")).unwrap()).unwrap();
    assert_eq!(record["verdict"], "pass");
    assert_eq!(record["seed"], 11);
    assert!(dir.path().join("trajectory_0.csv").exists());
}

#[test]
fn overrides_reach_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = rslab()
        .args(["run", config("quick.toml").to_str().unwrap(), "--seed", "99", "--modes", "4", "--horizon", "60"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("runrecord.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 99);
    assert_eq!(record["config"]["domain"]["N"], 4);
    assert_eq!(record["config"]["grid"]["T"], 60.0);
}

#[test]
fn failing_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // pantograph delay q = 0.25 decays too slowly for the 1e-3 target at T = 200
    let cfg = dir.path().join("cfg.toml");
    let text = fs::read_to_string(config("asymptotic_stability.toml")).unwrap().replace("q_values = [0.25, 0.5, 1.0]", "q_values = [0.25]");
    fs::write(&cfg, text).unwrap();
    let out = rslab().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("[FAIL] tail_decay[q=0.25]"));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[experiment]\nkind = \"dissipativity\"\nbogus = 1\n").unwrap();
    let out = rslab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
}

#[test]
fn refused_hypothesis_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    let text = fs::read_to_string(config("quick.toml")).unwrap().replace("p0 = 0.5", "p0 = 2.0");
    fs::write(&cfg, text).unwrap();
    let out = rslab().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("hypothesis"));
}

#[test]
fn subcommand_rejects_config_of_another_kind() {
    let out = rslab().args(["decay", "--config", config("quick.toml").to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn comparison_time_beyond_horizon_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("omega.toml");
    fs::write(&cfg, "[experiment]\nkind = \"relaxation_suite\"\nalphas = [0.5]\ngammas = [1.0]\nmus = [1.0]\nsuite_horizon = 2.0\n").unwrap();
    let out = rslab().args(["verify-omega", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_omega_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("omega.toml");
    fs::write(
        &cfg,
        "[experiment]\nkind = \"relaxation_suite\"\nalphas = [0.5]\ngammas = [1.0]\nmus = [1.0]\ntimes = [0.1, 1.0]\nsuite_horizon = 2.0\n",
    )
    .unwrap();
    let out = rslab().args(["verify-omega", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("cross_method[alpha=0.5,gamma=1,mu=1]"));
}
