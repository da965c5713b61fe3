use std::process::Command;

fn tin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tin"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

#[test]
fn usage_errors_exit_with_1() {
    assert_eq!(tin(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(tin(&["infer", "--ckpt", "x"]).status.code(), Some(1));
    assert_eq!(tin(&["summary", "--variant", "tin3"]).status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = tin(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("make-synthetic"));
}

#[test]
fn data_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ckpt");
    let out = tin(&["summary", "--ckpt", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let garbage = dir.path().join("garbage.ckpt");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    assert_eq!(tin(&["summary", "--ckpt", garbage.to_str().unwrap()]).status.code(), Some(2));

    let manifest = dir.path().join("m.txt");
    std::fs::write(&manifest, "only-one-column\n").unwrap();
    let out = tin(&["train", "--manifest", manifest.to_str().unwrap(), "--out", "x.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m.txt:1:"));
}

#[test]
fn bad_config_is_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = tin(&["make-synthetic", "--out", data.to_str().unwrap(), "--count", "1", "--size", "24"]);
    assert!(out.status.success());
    let manifest = String::from_utf8(out.stdout).unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "momentum = lots\n").unwrap();
    let out = tin(&[
        "train",
        "--manifest",
        manifest.trim(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("n.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = tin(&["make-synthetic", "--out", data.to_str().unwrap(), "--count", "1", "--size", "24"]);
    let manifest = String::from_utf8(out.stdout).unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 1\nlr0 = 1e-4\naugment = none\n").unwrap();
    let train = |seed: &str, name: &str| {
        let ckpt = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_tin"))
            .args(["train", "--manifest", manifest.trim(), "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&ckpt)
            .env("TIN_SEED", seed)
            .env("RUST_LOG", "off")
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(ckpt).unwrap()
    };
    assert_eq!(train("3", "a.ckpt"), train("3", "b.ckpt"));
    assert_ne!(train("3", "a.ckpt"), train("4", "c.ckpt"));
}
