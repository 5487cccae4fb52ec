//! JSON and CSV outputs.
//!
//! JSON objects have sorted keys and every float is rounded to 12
//! significant digits, so equal inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use distmed_core::mediation::MediationReport;
use distmed_core::sensitivity::SensitivityResult;
use distmed_core::simulation::StudyResult;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{AppError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        // serde_json's default map is ordered by key
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report values serialize");
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("JSON value serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_canonical_json(value))
}

fn num(x: f64) -> String {
    format!("{}", round_sig(x))
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// `t, alpha, beta, indirect, p_pointwise, ci_lo, ci_hi`; the last three are
/// empty without bootstrap inference.
pub fn curves_csv(report: &MediationReport) -> String {
    let inf = report.inference.as_ref();
    let rows = report.grid.points().into_iter().enumerate().map(|(g, t)| {
        let opt = |f: &dyn Fn(&distmed_core::mediation::Inference) -> f64| inf.map(|i| num(f(i))).unwrap_or_default();
        vec![
            num(t),
            num(report.alpha_curve[g]),
            num(report.beta_curve[g]),
            num(report.indirect_curve[g]),
            opt(&|i| i.p_pointwise[g]),
            opt(&|i| i.ci_lower[g]),
            opt(&|i| i.ci_upper[g]),
        ]
    });
    csv_table(&["t", "alpha", "beta", "indirect", "p_pointwise", "ci_lo", "ci_hi"], rows)
}

pub fn sensitivity_csv(results: &[SensitivityResult]) -> String {
    let rows = results.iter().map(|r| {
        let rho = r.rho.values();
        // constant profiles print as one number
        let label = if rho.iter().all(|&v| v == rho[0]) { num(rho[0]) } else { String::from("profile") };
        vec![label, num(r.indirect_total_rho), r.converged.to_string()]
    });
    csv_table(&["rho", "indirect_total_rho", "converged"], rows)
}

/// `t, alpha, beta, indirect, rejection_rate` from a study's mean curves.
pub fn study_curves_csv(study: &StudyResult) -> String {
    let rows = study.design.grid.points().into_iter().enumerate().map(|(g, t)| {
        vec![
            num(t),
            num(study.mean_alpha[g]),
            num(study.mean_beta[g]),
            num(study.mean_indirect[g]),
            num(study.pointwise_rates[g]),
        ]
    });
    csv_table(&["t", "alpha", "beta", "indirect", "rejection_rate"], rows)
}

/// Sensitivity sweep output.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityBlock {
    pub effective_rank: usize,
    pub results: Vec<SensitivityResult>,
}

/// Top-level document written as `report.json`.
#[derive(Debug, Serialize)]
pub struct ReportDocument<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub outcome: &'a str,
    pub units: usize,
    pub clusters: usize,
    pub config: &'a crate::config::RunConfig,
    pub report: &'a MediationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<&'a SensitivityBlock>,
}

#[derive(Debug, Serialize)]
pub struct StudyDocument<'a> {
    pub schema_version: u32,
    pub study: &'a StudyResult,
}

/// Writes `report.json`, `curves.csv` and, for a sweep, `sensitivity.csv`.
pub fn write_report_files(dir: &Path, doc: &ReportDocument) -> Result<()> {
    write_json(&dir.join("report.json"), doc)?;
    write_text(&dir.join("curves.csv"), &curves_csv(doc.report))?;
    if let Some(s) = doc.sensitivity {
        write_text(&dir.join("sensitivity.csv"), &sensitivity_csv(&s.results))?;
    }
    Ok(())
}

pub fn write_study_files(dir: &Path, study: &StudyResult) -> Result<()> {
    write_json(&dir.join("study.json"), &StudyDocument { schema_version: SCHEMA_VERSION, study })?;
    write_text(&dir.join("curves.csv"), &study_curves_csv(study))
}

/// Plain-text summary of a `report.json` document.
pub fn summarize(doc: &Value) -> std::result::Result<String, String> {
    let version = doc.get("schema_version").and_then(Value::as_u64).ok_or("missing schema_version")?;
    if version != SCHEMA_VERSION as u64 {
        return Err(format!("unsupported schema_version {version}"));
    }
    let r = doc.get("report").ok_or("missing report")?;
    let f = |v: &Value, k: &str| v.get(k).and_then(Value::as_f64).ok_or(format!("missing field {k}"));
    let mut out = String::new();
    let outcome = doc.get("outcome").and_then(Value::as_str).unwrap_or("?");
    let _ = writeln!(out, "outcome           {outcome}");
    let _ = writeln!(out, "units             {}", doc.get("units").and_then(Value::as_u64).unwrap_or(0));
    let _ = writeln!(out, "direct effect     {}", f(r, "gamma")?);
    let _ = writeln!(out, "indirect effect   {}", f(r, "indirect_total")?);
    let _ = writeln!(out, "total effect      {}", f(r, "total_effect")?);
    if let Some(inf) = r.get("inference").filter(|v| !v.is_null()) {
        let ci = inf.get("indirect_total_ci").and_then(Value::as_array).ok_or("missing indirect_total_ci")?;
        let lo = ci.first().and_then(Value::as_f64).unwrap_or(f64::NAN);
        let hi = ci.get(1).and_then(Value::as_f64).unwrap_or(f64::NAN);
        let _ = writeln!(out, "indirect 95% CI   [{lo}, {hi}]");
        let _ = writeln!(out, "p (global)        {}", f(inf, "p_global")?);
        let _ = writeln!(out, "replicates        {}", inf.get("replicates").and_then(Value::as_u64).unwrap_or(0));
    }
    if let Some(results) = doc.pointer("/sensitivity/results").and_then(Value::as_array) {
        let _ = writeln!(out, "sensitivity       rho -> indirect");
        for s in results {
            let rho = s.pointer("/rho/values/0").and_then(Value::as_f64).unwrap_or(f64::NAN);
            let _ = writeln!(out, "  {rho:>6}  {}", f(s, "indirect_total_rho")?);
        }
    }
    Ok(out)
}
