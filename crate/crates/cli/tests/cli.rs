use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_endoscope"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("endoscope-cli-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d.join(name)
}

fn run(args: &[&str], out: &Path) -> (Output, Value) {
    let o = bin().args(args).arg("--out").arg(out).output().unwrap();
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    (o, m)
}

#[test]
fn missing_two_is_a_config_error() {
    let cfg = tmp("bad.toml");
    let text = std::fs::read_to_string(configs().join("default.toml")).unwrap().replace("finite_places = [2]", "finite_places = [3, 5]");
    std::fs::write(&cfg, text).unwrap();
    let out = tmp("bad.json");
    let (o, m) = run(&["all", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("S.finite_places: finite_places must contain 2"), "{err}");
    assert_eq!(m["schema"], "v1");
    assert_eq!(m["pass"], false);
    assert_eq!(m["error"]["field"], "S.finite_places");
    assert_eq!(m["error"]["message"], "finite_places must contain 2");
}

#[test]
fn unreadable_config() {
    let out = tmp("none.json");
    let (o, m) = run(&["specfun", "--config", "/nonexistent/x.toml"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(m["error"]["message"].as_str().unwrap().contains("cannot read"));
}

#[test]
fn specfun_manifest_is_deterministic() {
    let cfg = configs().join("default.toml");
    let (a, b) = (tmp("sf1.json"), tmp("sf2.json"));
    let (o1, m) = run(&["specfun", "--config", cfg.to_str().unwrap()], &a);
    let (o2, _) = run(&["specfun", "--config", cfg.to_str().unwrap(), "--jobs", "3"], &b);
    assert!(o1.status.success() && o2.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(m["criteria"][0]["id"], 6);
    assert_eq!(m["criteria"][0]["pass"], true);
    assert_eq!(m["config"]["S"]["finite_places"][0], 2);
    // timings live next to the manifest
    let t: Value = serde_json::from_str(&std::fs::read_to_string(tmp("sf1.json.timings.json")).unwrap()).unwrap();
    assert!(t["phases"].as_array().unwrap().iter().any(|p| p["name"] == "total"));
}

#[test]
fn seed_is_logged_and_ignored() {
    let (a, b) = (tmp("seed1.json"), tmp("seed2.json"));
    let o = bin().args(["poisson", "--out"]).arg(&a).env("ENDOSCOPE_SEED", "12345").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("ENDOSCOPE_SEED=12345"));
    let o = bin().args(["poisson", "--out"]).arg(&b).env_remove("ENDOSCOPE_SEED").output().unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn tolerance_scale_tightens_numerical_checks_only() {
    let out = tmp("tight.json");
    let (o, m) = run(&["specfun", "--tolerance-scale", "1e-6"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(m["criteria"][0]["pass"], false);
    // exact checks have nothing to scale
    let (o, m) = run(&["orbital-oracle", "--tolerance-scale", "1e-6"], &tmp("tight2.json"));
    assert!(o.status.success());
    let ids: Vec<u64> = m["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![1, 2, 3]);
}

#[test]
fn kloosterman_default_has_crt_table() {
    let cfg = configs().join("default.toml");
    let (o, m) = run(&["kloosterman", "--config", cfg.to_str().unwrap()], &tmp("kl.json"));
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("product of local sums"), "{stdout}");
    let table = m["criteria"][0]["detail"]["extra"]["table"].as_array().unwrap();
    assert!(!table.is_empty());
    for row in table {
        assert_eq!(row["direct"], row["product"]);
    }
}

#[test]
fn traces_report_terms_with_anchor() {
    let cfg = configs().join("default.toml");
    let (o, m) = run(&["traces", "--config", cfg.to_str().unwrap()], &tmp("tr.json"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let reports = m["reports"].as_array().unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, vec!["one_dim_term", "trace_one_dim", "eisenstein_term", "trace_eisenstein"]);
    for r in reports {
        assert_eq!(r["criterion"], 11);
        assert!(!r["anchor"].as_str().unwrap().is_empty());
        assert!(r["re"].is_number() && r["trunc_est"].is_number());
    }
}

#[test]
fn inline_step_data_is_accepted_but_traces_need_standard_functions() {
    let cfg = tmp("step.toml");
    let js = r#"json:[{"sign":1,"nu":[0],"place":0,"step":{"prime":2,"pieces":[{"center":"1","radius_exp":3,"re":1.0,"im":0.0}]}}]"#;
    let text = std::fs::read_to_string(configs().join("default.toml")).unwrap().replace("\"standard:f=K\"", &format!("'{js}'"));
    std::fs::write(&cfg, text).unwrap();
    let (o, m) = run(&["traces", "--config", cfg.to_str().unwrap()], &tmp("step.json"));
    // a structured failure, not a crash
    assert_eq!(o.status.code(), Some(1));
    let c = &m["criteria"][0];
    assert_eq!(c["pass"], false);
    assert!(c["detail"]["failures"][0]["error"].as_str().unwrap().contains("standard test functions"));
}
