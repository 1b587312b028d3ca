use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn xref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xref")).args(args).env_remove("XREF_CONFIG_DIR").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate(dir: &TempDir, sim: &str, flowchart: &str) -> (Output, std::path::PathBuf) {
    let cfg = write_config(dir.path(), "c.json", &format!(r#"{{"schema_version":1,"simulation":{sim}}}"#));
    let out = dir.path().join("out");
    let o = xref(&["simulate", "--config", &cfg, "--flowchart", flowchart, "--out", out.to_str().unwrap()]);
    (o, out)
}

#[test]
fn simulate_five_domains() {
    let dir = TempDir::new().unwrap();
    let (o, out) = simulate(&dir, r#"{"m":5,"l":3,"difficulty_bits":6,"seed":3}"#, "1");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["completed_domains"].as_array().unwrap().len(), 5);
    assert_eq!(s["phase_messages"][0], 24);
    assert_eq!(s["audits"].as_array().unwrap().len(), 5);
    assert!(s["audits"].as_array().unwrap().iter().all(|a| a["verdict"] == "consistent"));
    let transcript = fs::read_to_string(out.join("transcript.jsonl")).unwrap();
    for line in transcript.lines() {
        let _: Value = serde_json::from_str(line).unwrap();
    }
    assert!(transcript.lines().count() > 50);
}

#[test]
fn simulate_flowchart2_with_three_failures() {
    let dir = TempDir::new().unwrap();
    let (o, out) = simulate(
        &dir,
        r#"{"m":10,"l":2,"t":3,"difficulty_bits":4,"failure_schedule":[{"domain":1,"at_round":0},{"domain":4,"at_round":0},{"domain":7,"at_round":1}]}"#,
        "2",
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["completed_domains"].as_array().unwrap().len(), 7);
    assert_eq!(s["failed_domains"], serde_json::json!([1, 4, 7]));
}

#[test]
fn simulate_aborts_beyond_tolerance() {
    let dir = TempDir::new().unwrap();
    let (o, _) = simulate(
        &dir,
        r#"{"m":10,"l":2,"t":3,"difficulty_bits":4,"failure_schedule":[{"domain":1,"at_round":0},{"domain":2,"at_round":0},{"domain":3,"at_round":0},{"domain":4,"at_round":0}]}"#,
        "2",
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("aborted: tolerance exceeded"));
}

#[test]
fn simulate_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let (o, _) = simulate(&dir, r#"{"m":3,"colour":1}"#, "1");
    assert_eq!(code(&o), 2);
    let (o, _) = simulate(&dir, r#"{"m":3,"failure_schedule":[{"domain":1,"at_round":0}]}"#, "1");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty failure_schedule"));
    let (o, _) = simulate(&dir, r#"{"m":0}"#, "1");
    assert_eq!(code(&o), 2);
    assert_eq!(code(&xref(&["simulate", "--config", "/nonexistent.json", "--out", "x"])), 2);
    assert_eq!(code(&xref(&["simulate", "--out", "x"])), 2);
    assert_eq!(code(&xref(&["simulate", "--flowchart", "3", "--out", "x"])), 2);
}

#[test]
fn config_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "xref.json", r#"{"schema_version":1,"simulation":{"m":2,"difficulty_bits":4}}"#);
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_xref"))
        .args(["simulate", "--out", out.to_str().unwrap()])
        .env("XREF_CONFIG_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn tamper_demo_outcomes() {
    let dir = TempDir::new().unwrap();
    let (o, out) = simulate(&dir, r#"{"m":4,"l":3,"difficulty_bits":6}"#, "1");
    assert_eq!(code(&o), 0);
    let snap = out.join("world.json");
    let snap = snap.to_str().unwrap();
    let referenced = read_json(&out.join("summary.json"))["audits"][2]["height"].as_u64().unwrap().to_string();

    let o = xref(&["tamper-demo", "--snapshot", snap, "--domain", "2", "--height", &referenced]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("conflicting domains: 0 1 3\n"));

    let tip = read_json(&out.join("world.json"))["chains"]["2"]["blocks"].as_array().unwrap().len() - 1;
    let o = xref(&["tamper-demo", "--snapshot", snap, "--domain", "2", "--height", &tip.to_string()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("verdict: no evidence"));

    let o = xref(&["tamper-demo", "--snapshot", snap, "--domain", "2", "--height", &referenced, "--no-remine"]);
    let text = stdout(&o);
    assert!(text.contains("local validation: invalid"));
    assert!(!text.contains("audited height"));

    assert_eq!(code(&xref(&["tamper-demo", "--snapshot", "/missing.json", "--domain", "0", "--height", "0"])), 2);
    assert_eq!(code(&xref(&["tamper-demo", "--snapshot", snap, "--domain", "9", "--height", "0"])), 2);
}

#[test]
fn dump_chain_prints_valid_chain() {
    let dir = TempDir::new().unwrap();
    let (_, out) = simulate(&dir, r#"{"m":3,"difficulty_bits":4}"#, "1");
    let o = xref(&["dump-chain", "--snapshot", out.join("world.json").to_str().unwrap(), "--domain", "1"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["validation"], "valid");
    assert_eq!(v["hysteresis_verification"], "valid");
    assert_eq!(v["hysteresis_entries"], 1);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 9);
}

#[test]
fn capacity_table() {
    let o = xref(&["capacity"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("600.000000,")).unwrap();
    let g: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((g - 7.00).abs() < 0.05);
    let footer: Vec<&str> =
        text.lines().skip_while(|l| *l != "tau_opt,max_capacity_tps").nth(1).unwrap().split(',').collect();
    assert_eq!(footer[0], "12.000000");
    assert!((footer[1].parse::<f64>().unwrap() - 131.4).abs() < 1.0);

    let o = xref(&["capacity", "--scale", "5", "10", "5", "200"]);
    assert!(stdout(&o).ends_with("scaled_capacity\n50000\n"));

    let o = xref(&["capacity", "--format", "json", "--tau-sweep", "100:300:100", "--c", "1000", "--tau-fork", "10"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["optimum"]["tau_opt"], 10.0);

    assert_eq!(code(&xref(&["capacity", "--tau-sweep", "10:1"])), 2);
    assert_eq!(code(&xref(&["capacity", "--tau-sweep", "x:1:1"])), 2);
}

fn mc_config(dir: &Path) -> String {
    write_config(
        dir,
        "mc.json",
        r#"{"schema_version":1,"monte_carlo":{"n_nodes":1000,"m_values":[10,100],"alpha_values":[2],"top_x_values":[10,30],"trials":60,"seed":9,"failure_m_values":[10,100],"f_values":[1,3,5]}}"#,
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn tamper_mc_outputs_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = mc_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&xref(&["tamper-mc", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"])), 0);
    assert_eq!(code(&xref(&["tamper-mc", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "3"])), 0);
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "r_m100_alpha2.csv",
            "r_m10_alpha2.csv",
            "rprime_m100_alpha2_x10.csv",
            "rprime_m100_alpha2_x30.csv",
            "rprime_m10_alpha2_x10.csv",
            "rprime_m10_alpha2_x30.csv",
            "summary.json"
        ]
    );
    let s = read_json(&a.join("summary.json"));
    assert_eq!(s["cells"].as_array().unwrap().len(), 4);
    assert_eq!(s["r_prime"]["at_most_one_fraction"], 1.0);

    let c = dir.path().join("c");
    xref(&["tamper-mc", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "10", "--raw-samples"]);
    assert_ne!(fs::read(a.join("r_m10_alpha2.csv")).unwrap(), fs::read(c.join("r_m10_alpha2.csv")).unwrap());
    let raw = fs::read_to_string(c.join("samples_m10_alpha2_x10.csv")).unwrap();
    assert_eq!(raw.lines().count(), 61);
}

#[test]
fn failure_mc_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = mc_config(dir.path());
    let a = dir.path().join("a");
    assert_eq!(code(&xref(&["failure-mc", "--config", &cfg, "--out", a.to_str().unwrap()])), 0);
    let names: Vec<String> = files(&a).into_iter().map(|f| f.0).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("r_")).count(), 6);
    assert_eq!(names.iter().filter(|n| n.starts_with("rprime_")).count(), 6);
    let s = read_json(&a.join("summary.json"));
    assert!(s["cells"].as_array().unwrap().iter().all(|c| c["r_at_least_one_fraction"] == 1.0));

    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"schema_version":1,"monte_carlo":{"failure_m_values":[4],"f_values":[5]}}"#,
    );
    assert_eq!(code(&xref(&["failure-mc", "--config", &bad, "--out", a.to_str().unwrap()])), 2);
    let bad =
        write_config(dir.path(), "bad2.json", r#"{"schema_version":1,"monte_carlo":{"n_nodes":1001,"m_values":[10]}}"#);
    assert_eq!(code(&xref(&["tamper-mc", "--config", &bad, "--out", a.to_str().unwrap()])), 2);
}
