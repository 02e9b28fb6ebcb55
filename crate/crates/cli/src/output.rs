//! Deterministic artifact emission: CSV with 17-significant-digit decimals,
//! LF line endings, fixed column order; JSON mirrors via serde.

use std::fmt::Write as _;
use std::path::Path;

pub use groundstate::field::format_g17;

/// A check-suite row: `check_name, predicted, measured, rel_error,
/// tolerance, pass`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckRow {
    pub check_name: String,
    pub predicted: f64,
    pub measured: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn checks_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("check_name,predicted,measured,rel_error,tolerance,pass\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.check_name,
            format_g17(row.predicted),
            format_g17(row.measured),
            format_g17(row.rel_error),
            format_g17(row.tolerance),
            row.pass
        );
    }
    out
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    write_text(dir, name, &(text + "\n"))
}
