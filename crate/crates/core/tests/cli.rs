use std::process::{Command, Output};

fn friedrichs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_friedrichs"))
        .args(["--samples", "16384"])
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn membership_answers_inside_or_outside() {
    let o = friedrichs(&["membership", "pentablock", "0,2i,1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "outside");
    let o = friedrichs(&["membership", "tetrablock", "0.1,0.2i,0"]);
    assert_eq!(stdout(&o).trim(), "inside");
}

#[test]
fn fibers_lists_every_preimage() {
    let o = friedrichs(&["fibers", "pi:2", "--at", "0,-0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = v["preimages"].as_array().unwrap();
    assert_eq!(p.len(), 2);
    assert_ne!(p[0], p[1]);
    assert!(v["max_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn friedrichs_command_passes_on_tetrablock() {
    // 2^14 samples sit above the rank-one gap by noise alone
    let o = Command::new(env!("CARGO_BIN_EXE_friedrichs"))
        .args(["--samples", "65536", "friedrichs", "tetrablock", "--degree", "3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_and_domain_errors_exit_one() {
    assert_eq!(friedrichs(&["volume", "dodecahedron"]).status.code(), Some(1));
    assert_eq!(friedrichs(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(friedrichs(&["membership", "disc", "1,2"]).status.code(), Some(1));
    assert_eq!(friedrichs(&["--help"]).status.code(), Some(0));
}

#[test]
fn exploratory_domain_needs_the_flag() {
    assert_eq!(friedrichs(&["friedrichs", "Gtilde:4", "--degree", "2"]).status.code(), Some(1));
    let o = friedrichs(&["friedrichs", "Gtilde:4", "--degree", "2", "--exploratory"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("EXPLORATORY"));
}

#[test]
fn out_and_csv_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let csv = dir.path().join("runs.csv");
    for _ in 0..2 {
        let o = Command::new(env!("CARGO_BIN_EXE_friedrichs"))
            .args(["--samples", "16384", "--no-timestamp", "--out"])
            .arg(&out)
            .arg("--csv")
            .arg(&csv)
            .args(["verify", "cov", "pi:2", "--degree", "2"])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let report = if report.is_array() { report[0].clone() } else { report };
    assert_eq!(report["verdict"], "PASS");
    assert_eq!(report["identity"], "cov");
    let rows = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = rows.lines().collect();
    assert!(lines[0].starts_with("identity,domain,map"));
    assert_eq!(lines.len(), 3, "header plus one row per run");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "samples = 4096\nseed = 9\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_friedrichs"))
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", "3", "--no-timestamp", "volume", "disc"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("4096"), "{text}");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_friedrichs")).arg("--config").arg(&cfg).args(["volume", "disc"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
