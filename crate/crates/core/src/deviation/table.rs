//! Regime tables: one row per model, sorted by regime.

use std::fmt::Write;

use serde::Serialize;

use super::{Branch, ModelSpec, Regime, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    /// Position of the model in the input list.
    pub index: usize,
    pub theta: f64,
    pub a: f64,
    pub regime: Option<Regime>,
    pub scale: Option<Scale>,
    pub exponent: Option<f64>,
    pub constant: Option<f64>,
    pub branch: Option<Branch>,
    /// Error text for rows that could not be evaluated.
    pub note: Option<String>,
}

/// Evaluates every model; rows come back sorted by regime tag, input order
/// within a tag, with failed rows last.
pub fn regime_rows(specs: &[ModelSpec]) -> Vec<RegimeRow> {
    let mut rows: Vec<RegimeRow> = specs
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let mut row = RegimeRow {
                index,
                theta: s.theta(),
                a: s.a(),
                regime: None,
                scale: None,
                exponent: None,
                constant: None,
                branch: None,
                note: None,
            };
            match s.rate() {
                Ok(r) => {
                    row.regime = Some(r.regime);
                    row.scale = Some(r.scale);
                    row.exponent = r.exponent;
                    row.constant = Some(r.constant);
                    row.branch = Some(r.branch);
                }
                Err(e) => row.note = Some(e.to_string()),
            }
            row
        })
        .collect();
    rows.sort_by_key(|r| (r.regime.is_none(), r.regime));
    rows
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.10}"))
}

/// Renders [`regime_rows`] as a Markdown or CSV table.
pub fn emit_regime_table(specs: &[ModelSpec], format: TableFormat) -> String {
    let rows = regime_rows(specs);
    let header = ["model", "theta", "a", "regime", "scale", "exponent", "constant", "branch"];
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
        }
        TableFormat::Csv => {
            let _ = writeln!(out, "{}", header.join(","));
        }
    }
    for r in rows {
        let cells = [
            r.index.to_string(),
            format!("{:.6}", r.theta),
            format!("{:.6}", r.a),
            r.regime.map_or_else(|| "unsupported".to_string(), |g| g.to_string()),
            r.scale.map_or_else(|| "-".to_string(), |s| s.to_string()),
            cell(r.exponent),
            cell(r.constant),
            match (&r.branch, &r.note) {
                (Some(b), _) => b.to_string(),
                (None, Some(n)) => n.replace(['|', ','], ";"),
                (None, None) => "-".to_string(),
            },
        ];
        match format {
            TableFormat::Markdown => {
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            TableFormat::Csv => {
                let _ = writeln!(out, "{}", cells.join(","));
            }
        }
    }
    out
}
