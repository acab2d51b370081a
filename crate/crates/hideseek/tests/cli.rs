use std::process::Command;

fn hideseek(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hideseek")).args(args).output().unwrap()
}

#[test]
fn record_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("world.toml");
    std::fs::write(&cfg, "max_time = 5.0\n").unwrap();
    let ds = dir.path().join("ds");
    let (cfg, ds) = (cfg.to_str().unwrap(), ds.to_str().unwrap());
    let out = hideseek(&["sim", "run", "--setting", "2v1", "--episodes", "3", "--config", cfg, "--record", ds]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|r| r["duration"].as_f64().unwrap() <= 5.0));
    let out = hideseek(&["dataset", "verify", ds]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: 3 episodes"));
}

#[test]
fn bad_arguments_fail() {
    assert!(!hideseek(&["sim", "run", "--setting", "0v3"]).status.success());
    assert!(!hideseek(&["eval", "--bind", "ghost:3", "--seeds", "1", "--episodes", "1"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    assert!(!hideseek(&["dataset", "verify", dir.path().to_str().unwrap()]).status.success());
}
