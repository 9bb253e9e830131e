use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use etcd_bench::io::matrix_from_csv;

const SMALL: &str = r#"
[system]
kind = "explicit"
adjacency = [[0, 1], [1, 0]]

[[system.subsystems]]
a = [[1.05]]
b = [[1.0]]
couplings = [{ neighbor = 1, a = [[0.05]] }]

[[system.subsystems]]
a = [[0.95]]
b = [[1.0]]
couplings = [{ neighbor = 0, a = [[0.05]] }]

[experiment]
horizon = 20
bw_scale = 0.01

[ets]
h = 1

[simulation]
x0 = [1.0, -1.0]
horizon = 60
"#;

fn etcd(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_etcd"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn with(extra: &str) -> String {
    format!("{SMALL}\n{extra}")
}

#[test]
fn gen_data_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&etcd(a.path(), SMALL, &["gen-data", "--seed", "7"]));
    ok(&etcd(b.path(), SMALL, &["gen-data", "--seed", "7"]));
    let data = read(a.path(), "data.csv");
    assert_eq!(data, read(b.path(), "data.csv"));
    assert!(data.starts_with("# n=2 m=2 nw=2 rho=20 seed=7"));
    let manifest: toml::Value = toml::from_str(&read(a.path(), "gen-data.manifest.toml")).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(7));
    assert!(manifest["summary"]["consistency_residual"].as_float().unwrap() <= 1e-12);
}

#[test]
fn minimal_and_noise_free_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("horizon = 20", "horizon = 1\nw_max = 0.0");
    ok(&etcd(dir.path(), &cfg, &["gen-data"]));
    let data = read(dir.path(), "data.csv");
    assert!(data.contains("rho=1 "));
    for line in data.lines().filter(|l| l.starts_with('w')) {
        assert!(line.split(',').skip(1).all(|c| c.parse::<f64>().unwrap() == 0.0), "{line}");
    }
}

#[test]
fn design_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&etcd(dir.path(), SMALL, &["design"]));
    assert!(stdout.starts_with("feasible"));
    let k = matrix_from_csv(&read(dir.path(), "K.csv")).unwrap();
    assert_eq!(k.shape(), (2, 2));
    assert!(read(dir.path(), "certificate.txt").contains("status = Feasible"));
    let summary = ok(&etcd(dir.path(), SMALL, &["simulate"]));
    assert!(summary.starts_with("variant,agent1,agent2,total,settling\ndynamic,"));
    let manifest: toml::Value = toml::from_str(&read(dir.path(), "simulate.manifest.toml")).unwrap();
    assert!(manifest["summary"]["lyapunov_violations"].as_integer().is_some());
    assert_ne!(manifest["summary"]["settling"].as_str(), Some("none"));
}

#[test]
fn decentralized_pattern_has_zero_coupling_gains() {
    let dir = tempfile::tempdir().unwrap();
    ok(&etcd(dir.path(), &with("[design]\npattern = \"decentralized\""), &["design"]));
    let k = matrix_from_csv(&read(dir.path(), "K.csv")).unwrap();
    assert_eq!(k[(0, 1)], 0.0);
    assert_eq!(k[(1, 0)], 0.0);
}

#[test]
fn model_based_design() {
    let dir = tempfile::tempdir().unwrap();
    ok(&etcd(dir.path(), &with("[design]\nmode = \"theorem2_model\""), &["design"]));
    assert!(!dir.path().join("out/data.csv").exists());
}

#[test]
fn zero_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    ok(&etcd(dir.path(), SMALL, &["design"]));
    let cfg = SMALL.replace("x0 = [1.0, -1.0]", "x0 = [0.0, 0.0]");
    let summary = ok(&etcd(dir.path(), &cfg, &["simulate"]));
    assert_eq!(summary.lines().nth(1), Some("dynamic,1,1,2,0"));
    assert_eq!(read(dir.path(), "events.csv").lines().skip(1).collect::<Vec<_>>(), ["0,0", "1,0"]);
}

#[test]
fn periodic_variant_transmits_every_sample() {
    let dir = tempfile::tempdir().unwrap();
    ok(&etcd(dir.path(), SMALL, &["design", "--variant", "periodic"]));
    let summary = ok(&etcd(dir.path(), SMALL, &["simulate", "--variant", "periodic"]));
    assert!(summary.lines().nth(1).unwrap().starts_with("periodic,60,60,120,"), "{summary}");
}

#[test]
fn theta_sweep_saturates_in_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("horizon = 60", "horizon = 20");
    let table = ok(&etcd(dir.path(), &cfg, &["sweep-theta", "--thetas", "1e9,2,1e6"]));
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "mode,theta,agent1,agent2,total");
    assert_eq!(rows.len(), 7);
    assert!(rows[1].starts_with("full_loop,2,") && rows[2].starts_with("replay,2,"));
    let replay = |theta: &str| rows.iter().find(|r| r.starts_with(&format!("replay,{theta},"))).unwrap().split(',').skip(2).collect::<Vec<_>>();
    assert_eq!(replay("1000000"), replay("1000000000"));
}

#[test]
fn single_theta_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(&etcd(dir.path(), SMALL, &["sweep-theta", "--thetas", "5"]));
    assert_eq!(table.lines().filter(|l| l.starts_with("full_loop")).count(), 1);
}

#[test]
fn comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let ets = ok(&etcd(dir.path(), SMALL, &["compare-ets"]));
    let names: Vec<&str> = ets.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["dynamic", "distributed", "decentralized", "periodic"]);
    assert!(ets.lines().any(|l| l.starts_with("periodic,60,60,120,")));
    let ctl = ok(&etcd(dir.path(), SMALL, &["compare-controllers"]));
    assert!(ctl.starts_with("controller,agent1,agent2,total,settling\ndistributed,60,60,120,"));
    assert!(ctl.contains("\ndecentralized,60,60,120,"));
}

#[test]
fn manifest_reruns_the_same_command() {
    let dir = tempfile::tempdir().unwrap();
    ok(&etcd(dir.path(), SMALL, &["gen-data", "--seed", "3"]));
    let first = read(dir.path(), "data.csv");
    let manifest = read(dir.path(), "gen-data.manifest.toml");
    let again = tempfile::tempdir().unwrap();
    ok(&etcd(again.path(), &manifest, &["gen-data"]));
    assert_eq!(read(again.path(), "data.csv"), first);
}

#[test]
fn inadmissible_parameters_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out = etcd(dir.path(), &SMALL.replace("h = 1", "h = 1\ntheta = 1.0\nlambda = 0.5"), &["design"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 - lambda - 1/theta"));
    assert!(!dir.path().join("out/data.csv").exists());
}

#[test]
fn infeasible_design_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("a = [[1.05]]\nb = [[1.0]]", "a = [[2.0]]\nb = [[0.0]]");
    let out = etcd(dir.path(), &format!("{cfg}\n[design]\nmode = \"theorem2_model\""), &["design"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    fs::create_dir_all(&out_dir).unwrap();
    fs::write(out_dir.join("K.csv"), "10.0,0.0\n0.0,10.0\n").unwrap();
    fs::write(out_dir.join("omega_1.csv"), "1.0\n").unwrap();
    fs::write(out_dir.join("omega_2.csv"), "1.0\n").unwrap();
    let out = etcd(dir.path(), SMALL, &["simulate"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_files_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(etcd(dir.path(), SMALL, &["simulate"]).status.code(), Some(4));
    let out = Command::new(env!("CARGO_BIN_EXE_etcd"))
        .args(["design", "--config", "/nonexistent/config.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bad_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = etcd(dir.path(), "[ets]\nthetta = 2.0\n", &["gen-data"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid configuration"));
}
