//! Report documents and their emitters. The JSON form is byte-deterministic
//! given identical inputs and seed; wall-clock timing therefore appears only
//! in the text rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use riskshare_core::equilibrium::{EquilibriumCertificate, VerificationMethod};

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentRow {
    pub agent: usize,
    pub budget_residual: f64,
    pub achieved: f64,
    pub best_deviation: f64,
    pub deviation_gap: f64,
    pub method: VerificationMethod,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub method: String,
    pub valid: bool,
    pub clearance_residual: f64,
    pub residual: Option<f64>,
    pub agents: Vec<AgentRow>,
    pub notes: Vec<String>,
}

impl CertificateReport {
    pub fn from_certificate(
        method: &str,
        cert: &EquilibriumCertificate,
        residual: Option<f64>,
        notes: &[String],
    ) -> Self {
        Self {
            method: method.into(),
            valid: cert.valid,
            clearance_residual: cert.clearance_residual,
            residual,
            agents: cert
                .per_agent
                .iter()
                .enumerate()
                .map(|(i, c)| AgentRow {
                    agent: i,
                    budget_residual: c.budget_residual,
                    achieved: c.achieved,
                    best_deviation: c.best_deviation,
                    deviation_gap: c.deviation_gap,
                    method: c.method,
                })
                .collect(),
            notes: notes.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub engine_version: String,
    pub seed: u64,
    pub scenario: Value,
    pub tables: Vec<Table>,
    pub certificates: Vec<CertificateReport>,
    pub warnings: Vec<String>,
    /// Wall-clock milliseconds; excluded from JSON to keep it reproducible
    /// byte for byte.
    #[serde(skip)]
    pub timing_ms: u128,
}

impl ReportDocument {
    pub fn new(scenario: Value, seed: u64) -> Self {
        Self {
            engine_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            scenario,
            tables: Vec::new(),
            certificates: Vec::new(),
            warnings: Vec::new(),
            timing_ms: 0,
        }
    }

    /// Every heuristic verification row must carry a warning entry.
    pub fn warn_on_heuristics(&mut self) {
        let mut extra = Vec::new();
        for cert in &self.certificates {
            for row in &cert.agents {
                if row.method == VerificationMethod::Heuristic {
                    extra.push(format!(
                        "certificate {}: agent {} verified heuristically; the deviation bound is not exact",
                        cert.method, row.agent
                    ));
                }
            }
        }
        for w in extra {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "engine {} seed {}", self.engine_version, self.seed);
        let _ = writeln!(out, "elapsed {} ms", self.timing_ms);
        for t in &self.tables {
            let _ = writeln!(out, "\n[{}]", t.name);
            let _ = writeln!(out, "{}", t.columns.join("\t"));
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(render_cell).collect();
                let _ = writeln!(out, "{}", cells.join("\t"));
            }
        }
        for c in &self.certificates {
            let _ = writeln!(
                out,
                "\n[certificate {}] valid={} clearance={:.3e}{}",
                c.method,
                c.valid,
                c.clearance_residual,
                c.residual.map(|r| format!(" residual={r:.3e}")).unwrap_or_default()
            );
            let _ = writeln!(out, "agent\tbudget_residual\tdeviation_gap\tmethod");
            for a in &c.agents {
                let _ = writeln!(
                    out,
                    "{}\t{:+.3e}\t{:+.3e}\t{:?}",
                    a.agent, a.budget_residual, a.deviation_gap, a.method
                );
            }
            for n in &c.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "\nwarnings:");
            for w in &self.warnings {
                let _ = writeln!(out, "  - {w}");
            }
        }
        out
    }

    /// Writes the report in the requested format. CSV emits one file per
    /// table plus a manifest; the other formats produce one file.
    pub fn emit(&self, out_dir: &Path, format: Format) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();
        match format {
            Format::Json => {
                let path = out_dir.join("report.json");
                std::fs::write(&path, self.to_json())?;
                written.push(path);
            }
            Format::Text => {
                let path = out_dir.join("report.txt");
                std::fs::write(&path, self.to_text())?;
                written.push(path);
            }
            Format::Csv => {
                let mut manifest = Vec::new();
                for t in &self.tables {
                    let file = format!("{}.csv", t.name);
                    let path = out_dir.join(&file);
                    let mut body = t.columns.join(",");
                    body.push('\n');
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(render_csv_cell).collect();
                        body.push_str(&cells.join(","));
                        body.push('\n');
                    }
                    std::fs::write(&path, body)?;
                    manifest.push(file);
                    written.push(path);
                }
                let manifest_doc = serde_json::json!({
                    "engine_version": self.engine_version,
                    "seed": self.seed,
                    "tables": manifest,
                    "warnings": self.warnings,
                    "certificates": self.certificates,
                });
                let path = out_dir.join("manifest.json");
                let mut s = serde_json::to_string_pretty(&manifest_doc).expect("manifest serializes");
                s.push('\n');
                std::fs::write(&path, s)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

fn render_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render_csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains(',') || s.contains('"') => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            other => Err(format!("unknown format '{other}', expected json|csv|text")),
        }
    }
}

/// JSON number helper keeping full float round-trip precision.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

pub fn flag(b: bool) -> Value {
    Value::Bool(b)
}
