//! Deterministic CSV assembly: fixed headers, floats at 17 significant
//! digits, rows pre-sorted by the runner so output bytes never depend on
//! scheduling.

use crate::util::fmt_f64;
use std::fmt::Write as _;

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Field {
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Bool(bool),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::UInt(v) => v.to_string(),
            Field::Float(v) => fmt_f64(*v),
            Field::Str(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
        }
    }
}

/// Result of one experiment run: a rectangular table plus a JSON summary and
/// any rendered plots.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
    pub summary: serde_json::Value,
    /// (file name, SVG document) pairs.
    pub plots: Vec<(String, String)>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            let mut first = true;
            for field in row {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{}", field.render());
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Writes `results.csv` and `summary.json` (and any plots) under `dir`.
pub fn write_results_csv(result: &SweepResult, dir: &std::path::Path) -> crate::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), result.to_csv())?;
    let summary = serde_json::to_string_pretty(&result.summary)?;
    std::fs::write(dir.join("summary.json"), summary)?;
    for (name, svg) in &result.plots {
        std::fs::write(dir.join(name), svg)?;
    }
    Ok(())
}
