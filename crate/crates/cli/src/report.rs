//! Artifact writers. Every number a CSV carries is printed with twelve
//! significant digits through one formatter so reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use platelab_core::traces::BoundaryTrace;

/// Canonical numeric cell: twelve significant digits, scientific form.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        // Avoids the -0.0e0 / 0.0e0 split for signed zero inputs.
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Optional cell; absent values print as an empty field.
pub fn sig_opt(x: Option<f64>) -> String {
    x.map(sig).unwrap_or_default()
}

/// A CSV table under construction. Rows must match the header width.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { header: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Write one artifact under `dir`, creating the directory on first use.
/// Returns the path actually written for the report manifest.
pub fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Serialize a report to pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    Ok(text)
}

/// Common JSON envelope: the effective configuration (provenance), the
/// command verdict, and the artifact list beside command-specific payload.
#[derive(serde::Serialize)]
pub struct Envelope<T: serde::Serialize> {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub verdict: String,
    pub artifacts: Vec<String>,
    #[serde(flatten)]
    pub payload: T,
}

pub fn verdict_label(pass: bool) -> String {
    if pass { "pass" } else { "fail" }.to_string()
}

/// Full boundary trace as CSV, one row per quadrature node. Curvature is
/// blank on domains without a smooth closed boundary (rectangles).
pub fn trace_table(trace: &BoundaryTrace<f64>) -> Table {
    let mut table = Table::new([
        "node",
        "x",
        "y",
        "arc_weight",
        "support",
        "curvature",
        "normal_derivative",
        "second_normal",
        "laplacian",
        "flux",
    ]);
    for (i, node) in trace.nodes.iter().enumerate() {
        table.push([
            i.to_string(),
            sig(node.position[0]),
            sig(node.position[1]),
            sig(node.arc_weight),
            sig(node.x_dot_nu),
            sig_opt(node.curvature),
            sig(trace.u_nu[i]),
            sig(trace.u_nunu[i]),
            sig(trace.lap[i]),
            sig(trace.dlap_dnu[i]),
        ]);
    }
    table
}
