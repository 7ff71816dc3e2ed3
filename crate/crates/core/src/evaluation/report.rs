use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalError, MetricsReport};

/// Plain-text table: one line per class, then the averages.
pub fn format_report(r: &MetricsReport, class_names: &[String]) -> String {
    let mut s = String::new();
    let width = class_names.iter().map(String::len).max().unwrap_or(0).max(12);
    let _ = writeln!(s, "{:<width$}  precision  recall     f1-score   support", "");
    for (i, c) in r.per_class.iter().enumerate() {
        let name = class_names.get(i).cloned().unwrap_or_else(|| format!("class {i}"));
        let _ = writeln!(
            s,
            "{name:<width$}  {:<9.4}  {:<9.4}  {:<9.4}  {}",
            c.precision, c.recall, c.f1, c.support
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<width$}  {:<9.4}  {:<9.4}  {:<9.4}  {}",
        "macro avg", r.precision_macro, r.recall_macro, r.f1_macro, r.total
    );
    let _ = writeln!(
        s,
        "{:<width$}  {:<9.4}  {:<9.4}  {:<9.4}  {}",
        "weighted avg", r.precision_weighted, r.recall_weighted, r.f1_weighted, r.total
    );
    let _ = writeln!(s, "{:<width$}  {:.4}", "accuracy", r.accuracy);
    if let Some(b) = r.binary_output_accuracy {
        let _ = writeln!(s, "{:<width$}  {:.4}", "per-output binary accuracy", b);
    }
    s
}

/// Writes the report as pretty JSON.
pub fn write_report(r: &MetricsReport, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(r).expect("reports always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}
