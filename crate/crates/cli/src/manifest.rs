//! Run manifest (schema `v1`) and the stdout table.
//!
//! The manifest is a pure function of the config and the command, so wall-clock times go
//! to a sidecar `<manifest>.timings.json` instead.

use std::path::{Path, PathBuf};
use std::time::Instant;

use endoscope::checks::Check;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

pub const SCHEMA: &str = "v1";

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

impl Phase {
    pub fn new(name: &str, since: Instant) -> Self {
        Phase { name: name.into(), seconds: since.elapsed().as_secs_f64() }
    }
}

/// What each criterion compares, used as the anchor of its reports.
pub fn anchor(id: u32) -> &'static str {
    match id {
        1 => "closed local orbital integrals (maximal compact, X^m, Iwahori)",
        2 => "Shalika germ expansion of orbital integrals",
        3 => "volume of the Hecke double coset",
        4 => "CRT factorization of generalized Kloosterman sums",
        5 => "Euler product of the Kloosterman Dirichlet series",
        6 => "Mellin transform of the smooth cutoff, Bessel series, zeta values",
        7 => "functional equation of the partial Zagier L-function",
        8 => "approximate functional equation at s = 1",
        9 => "semilocal Poisson summation and the S-adic fundamental domain",
        10 => "Poisson summation of the elliptic terms per (k, f) block",
        11 => "one-dimensional and Eisenstein terms against spectral traces",
        12 => "final trace identity",
        _ => "",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub anchor: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub scaled_threshold: f64,
    pub worst_ratio: f64,
    pub cases: usize,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub config: Value,
    pub tolerance_scale: f64,
    pub criteria: Vec<CriterionResult>,
    /// each term report tagged with the criterion and anchor it belongs to
    pub reports: Vec<Value>,
    pub pass: bool,
    pub timing_file: Option<String>,
    pub error: Option<Value>,
}

pub fn timings_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".timings.json");
    PathBuf::from(s)
}

impl RunManifest {
    pub fn new(command: &str, rc: &RunConfig, scale: f64, checks: &[Check]) -> Self {
        let criteria: Vec<CriterionResult> = checks
            .iter()
            .map(|c| CriterionResult {
                id: c.id,
                name: c.name.clone(),
                anchor: anchor(c.id).into(),
                pass: c.pass_at(scale),
                measured: c.measured,
                threshold: c.threshold,
                scaled_threshold: c.threshold * scale,
                worst_ratio: c.worst_ratio,
                cases: c.cases,
                detail: c.detail.clone(),
            })
            .collect();
        let mut reports = vec![];
        for c in checks {
            for r in &c.reports {
                let mut v = serde_json::to_value(r).expect("report serializes");
                v["criterion"] = json!(c.id);
                v["anchor"] = json!(anchor(c.id));
                reports.push(v);
            }
        }
        let pass = !criteria.is_empty() && criteria.iter().all(|c| c.pass);
        RunManifest {
            schema: SCHEMA.into(),
            command: command.into(),
            config: serde_json::to_value(rc).expect("config serializes"),
            tolerance_scale: scale,
            criteria,
            reports,
            pass,
            timing_file: Some("<manifest>.timings.json".into()),
            error: None,
        }
    }

    pub fn invalid(command: &str, path: Option<&Path>, e: &ConfigError) -> Self {
        RunManifest {
            schema: SCHEMA.into(),
            command: command.into(),
            config: json!({"path": path.map(|p| p.display().to_string())}),
            tolerance_scale: 1.0,
            criteria: vec![],
            reports: vec![],
            pass: false,
            timing_file: None,
            error: Some(json!({"kind": "config", "field": e.field, "message": e.message})),
        }
    }

    pub fn write(&self, out: &Path) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        s.push('\n');
        std::fs::write(out, s)
    }
}

pub fn write_timings(out: &Path, checks: &[Check], phases: &[Phase]) -> std::io::Result<()> {
    let v = json!({
        "schema": SCHEMA,
        "phases": phases,
        "criteria": checks.iter().map(|c| json!({"id": c.id, "seconds": c.seconds})).collect::<Vec<_>>(),
    });
    let mut s = serde_json::to_string_pretty(&v).map_err(std::io::Error::other)?;
    s.push('\n');
    std::fs::write(timings_path(out), s)
}

/// Combines per-config runs of one criterion: worst values, all cases, all reports.
pub fn merge(parts: Vec<Check>) -> Check {
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("at least one config");
    let mut details = vec![acc.detail.clone()];
    for c in it {
        acc.pass &= c.pass;
        acc.measured = acc.measured.max(c.measured);
        acc.worst_ratio = acc.worst_ratio.max(c.worst_ratio);
        acc.cases += c.cases;
        acc.seconds += c.seconds;
        acc.reports.extend(c.reports);
        details.push(c.detail);
    }
    if details.len() > 1 {
        acc.detail = json!({"per_config": details});
    }
    acc
}

fn fmt_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => format!("{x:.6e}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn print_rows(title: &str, rows: &[Value]) {
    let Some(Value::Object(first)) = rows.first() else { return };
    let cols: Vec<&String> = first.keys().filter(|k| !matches!(first[*k], Value::Array(_) | Value::Object(_))).collect();
    println!("  {title}");
    let cells: Vec<Vec<String>> = rows.iter().map(|r| cols.iter().map(|c| fmt_cell(&r[c.as_str()])).collect()).collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let line = |xs: Vec<String>| xs.iter().zip(&widths).map(|(x, w)| format!("{x:>w$}")).collect::<Vec<_>>().join("  ");
    println!("    {}", line(cols.iter().map(|c| c.to_string()).collect()));
    for r in cells {
        println!("    {}", line(r));
    }
}

pub fn print_table(checks: &[Check], scale: f64, crt_table: bool) {
    for c in checks {
        let mut line = c.line();
        if scale != 1.0 {
            line.push_str(&format!("  [scale {scale}: {}]", if c.pass_at(scale) { "PASS" } else { "FAIL" }));
        }
        println!("{line}");
        let extra = &c.detail["extra"];
        if crt_table && c.id == 4 {
            if let Value::Array(rows) = &extra["table"] {
                print_rows("Kl(0, m) direct vs product of local sums (p:local)", rows);
            }
        }
        if let Value::Array(rows) = &extra["blocks"] {
            print_rows("blocks", rows);
        }
        if let Value::Array(runs) = &extra["runs"] {
            for r in runs {
                println!(
                    "  n = {}  vartheta = {}  residual {:.3e}  relative {:.3e}  budget {:.3e}",
                    r["n"], r["vartheta"], r["residual"].as_f64().unwrap_or(f64::NAN), r["relative"].as_f64().unwrap_or(f64::NAN),
                    r["estimate"].as_f64().unwrap_or(f64::NAN)
                );
                if let Value::Array(terms) = &r["terms"] {
                    print_rows("truncation budget", terms);
                }
            }
        }
    }
}
