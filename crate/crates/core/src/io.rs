//! Configuration parsing and the on-disk output contract.
//!
//! Every float is written with 17 significant digits in scientific notation,
//! lines end in `\n`, and each CSV file carries exactly one header row.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::Probe;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{scalar_diagnostics, validate_kernel, validate_reactions, ModelConfig, ScalarDiagnostics, ValidationReport};
use crate::spectral::{CriticalLength, EigenResult};
use crate::steady::SteadyResult;

/// A validated configuration together with the reports produced on the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedConfig {
    pub config: ModelConfig,
    pub kernel_reports: Vec<ValidationReport>,
    pub reaction_report: ValidationReport,
    pub diagnostics: ScalarDiagnostics,
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let config: ModelConfig = serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
    let mut kernel_reports = Vec::with_capacity(2);
    for (name, k) in [("kernel1", &config.kernel1), ("kernel2", &config.kernel2)] {
        let rep = validate_kernel(k).map_err(|e| Error::ValidationError(format!("(J) {name}: {e}")))?;
        if let Some(fail) = rep.first_failure() {
            return Err(Error::ValidationError(format!("(J) {name}: {}", fail.clause)));
        }
        kernel_reports.push(rep);
    }
    let reaction_report = validate_reactions(&config.reactions, config.a, config.b)
        .map_err(|e| Error::ValidationError(format!("(H) reactions: {e}")))?;
    config.validate().map_err(|e| Error::ValidationError(e.to_string()))?;
    let diagnostics = scalar_diagnostics(&config);
    Ok(ParsedConfig { config, kernel_reports, reaction_report, diagnostics })
}

/// SHA-256 over the key-sorted compact JSON form of the configuration.
pub fn config_hash(c: &ModelConfig) -> String {
    let value = serde_json::to_value(c).expect("config serialises");
    let canonical = serde_json::to_string(&value).expect("value serialises");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub command: String,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    pub status: String,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn eigen_csv(rows: &[EigenResult]) -> String {
    csv(
        &["l", "lambda_p", "iterations", "residual"],
        rows.iter().map(|r| vec![fmt_f64(r.l), fmt_f64(r.lambda_p), r.iterations.to_string(), fmt_f64(r.residual)]),
    )
}

pub fn critlen_trace_csv(cl: &CriticalLength) -> String {
    csv(
        &["step", "l", "lambda_p"],
        cl.trace.iter().enumerate().map(|(i, s)| vec![i.to_string(), fmt_f64(s.l), fmt_f64(s.lambda_p)]),
    )
}

pub fn profile_csv(s: &SteadyResult) -> String {
    csv(
        &["x", "u", "v"],
        (0..s.x.len()).map(|i| vec![fmt_f64(s.x[i]), fmt_f64(s.u[i]), fmt_f64(s.v[i])]),
    )
}

pub fn front_csv(tr: &Trajectory) -> String {
    csv(
        &["t", "h", "hprime", "sup_u", "sup_v"],
        tr.front.iter().map(|f| vec![fmt_f64(f.t), fmt_f64(f.h), fmt_f64(f.hprime), fmt_f64(f.sup_u), fmt_f64(f.sup_v)]),
    )
}

pub fn snapshots_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t,x,u,v\n");
    for s in &tr.snapshots {
        let st = &s.state;
        for i in 0..st.u.len() {
            let x = i as f64 * tr.dx;
            let _ = writeln!(out, "{},{},{},{}", fmt_f64(st.t), fmt_f64(x), fmt_f64(st.u[i]), fmt_f64(st.v[i]));
        }
    }
    out
}

pub fn probes_csv(probes: &[Probe]) -> String {
    csv(
        &["index", "mu1", "mu2", "dt", "verdict", "certificate", "h_final"],
        probes.iter().enumerate().map(|(i, p)| {
            vec![
                i.to_string(),
                fmt_f64(p.mu1),
                fmt_f64(p.mu2),
                fmt_f64(p.dt),
                format!("{:?}", p.verdict),
                format!("{:?}", p.certificate),
                p.h_final.map(fmt_f64).unwrap_or_default(),
            ]
        }),
    )
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents.as_bytes())?;
    Ok(path)
}
