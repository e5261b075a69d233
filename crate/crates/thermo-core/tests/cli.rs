//! End-to-end runs of the `thermo` binary.

use std::process::{Command, Output};

fn thermo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermo")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_is_byte_identical_per_seed() {
    let args = ["thermo", "--model", "exponential:lambda0=2", "--N", "2..6", "--replicates", "300", "--seed", "11"];
    let a = thermo(&args);
    let b = thermo(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# thermo "));
    assert!(text.contains("# config: {"));
    // header + 5 rows
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["thermo", "--model", "normal-mean:D=2,sigma=1.5", "--prior", "gpi", "--N", "5,10", "--replicates", "200", "--seed", "3"];
    let one = thermo(&[&base[..], &["--jobs", "1"]].concat());
    let two = thermo(&[&base[..], &["--jobs", "2"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn json_output_and_out_file() {
    let dir = std::env::temp_dir().join(format!("thermo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.json");
    let o = thermo(&[
        "thermo", "--model", "uniform:L0=3", "--N", "4", "--replicates", "100", "--seed", "5", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["N"], 4.0);
    assert_eq!(v["config"]["seed"], 5);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_and_flag_override() {
    let dir = std::env::temp_dir().join(format!("thermo-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"model":"exponential:lambda0=1","N":[3,4],"replicates":100,"seed":9}"#).unwrap();
    let a = thermo(&["thermo", "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = thermo(&["thermo", "--config", cfg.to_str().unwrap(), "--seed", "10"]);
    assert_ne!(a.stdout, b.stdout);
    std::fs::write(&cfg, r#"{"model":"exponential","N":[3],"bogus":1}"#).unwrap();
    assert_eq!(thermo(&["thermo", "--config", cfg.to_str().unwrap(), "--seed", "1"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    // usage
    assert_eq!(thermo(&["thermo", "--model", "nope", "--N", "3", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(thermo(&["thermo", "--model", "exponential", "--N", "5,3", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(thermo(&["thermo", "--model", "exponential", "--N", "3"]).status.code(), Some(2));
    assert_eq!(thermo(&["gpi", "--model", "poisson:t=1", "--N", "3"]).status.code(), Some(2));
    // divergent evidence at N=1 under an improper prior
    let o = thermo(&["thermo", "--model", "normal-meanvar:D=1", "--N", "1", "--replicates", "10", "--seed", "1"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!o.stderr.is_empty());
    assert_eq!(thermo(&["--version"]).status.code(), Some(0));
}

#[test]
fn gpi_table_marks_divergence() {
    let o = thermo(&["gpi", "--model", "normal-meanvar:D=1", "--N", "1..3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("divergent"));
    assert!(text.contains("# warning:"));
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("3,") && last.ends_with(",ok"), "{last}");
}

#[test]
fn oracle_check_passes_and_negative_control_fails() {
    let ok = thermo(&["oracle-check", "--model", "exponential:lambda0=2", "--prior", "gpi", "--N", "5,20", "--replicates", "2000", "--seed", "1"]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    let bad = thermo(&[
        "oracle-check", "--model", "exponential:lambda0=2", "--prior", "gpi", "--N", "5,20", "--replicates", "2000", "--seed", "1",
        "--perturb-sigma", "2",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn lindley_table() {
    let o = thermo(&["select", "--lindley", "--L", "100", "--sigma", "1", "--N", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("gpi,100,1,100,")));
    assert!(text.lines().any(|l| l.starts_with("normalized,100,1,100,")));
}

#[test]
fn recursive_gpi_round_trips_through_prior_file() {
    let dir = std::env::temp_dir().join(format!("thermo-gpi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("w.csv");
    let o = thermo(&[
        "gpi", "--model", "poisson:t=100,m0=3", "--recursive", "--grid", "m=1..30", "--out", path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("m,logw,iteration,maxAbsS"), "{text}");
    let run = thermo(&["thermo", "--model", "poisson:t=100,m0=3", "--prior", path.to_str().unwrap(), "--N", "100", "--seed", "1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_config_with_params_and_theta0() {
    let dir = std::env::temp_dir().join(format!("thermo-params-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model":"poisson","params":{"t":10,"b":0},"theta0":6,"Nlist":[10],"replicates":2,"seed":1,"prior":"natural"}"#,
    )
    .unwrap();
    let o = thermo(&["thermo", "--config", cfg.to_str().unwrap(), "--route", "statistic"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains(r#""model":"poisson:t=10,m0=1,b=0""#), "{text}");
    let row = text.lines().last().unwrap();
    assert!(row.contains(",6,10,"), "{row}");
    std::fs::remove_dir_all(&dir).ok();
}
