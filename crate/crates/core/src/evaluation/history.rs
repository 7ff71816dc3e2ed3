use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, SweepParameter, SweepResult};
use crate::training::{EpochHistory, EpochMetrics, EpochRecord};

pub const HISTORY_COLUMNS: [&str; 11] = [
    "epoch",
    "loss",
    "accuracy",
    "precision_macro",
    "recall_macro",
    "f1_macro",
    "val_loss",
    "val_accuracy",
    "val_precision_macro",
    "val_recall_macro",
    "val_f1_macro",
];

pub const SWEEP_COLUMNS: [&str; 12] = [
    "parameter",
    "value",
    "final_loss",
    "val_loss",
    "accuracy",
    "precision_macro",
    "recall_macro",
    "f1_macro",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "binary_output_accuracy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryFormat {
    #[default]
    Csv,
    /// JSON document `{"columns": [...], "rows": [[...], ...]}` with the CSV column order.
    Json,
}

impl HistoryFormat {
    pub fn extension(self) -> &'static str {
        match self {
            HistoryFormat::Csv => "csv",
            HistoryFormat::Json => "json",
        }
    }
}

impl fmt::Display for HistoryFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for HistoryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(HistoryFormat::Csv),
            "json" => Ok(HistoryFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<serde_json::Value>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(what: &'static str, message: impl Into<String>) -> EvalError {
    EvalError::Parse {
        what,
        message: message.into(),
    }
}

/// Writes a header plus rows. Cells are already formatted; `None` is an empty cell / JSON null.
fn write_table(path: &Path, format: HistoryFormat, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), EvalError> {
    let file = File::create(path).map_err(io_err(path))?;
    match format {
        HistoryFormat::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(columns)?;
            for row in rows {
                w.write_record(row.iter().map(Cell::to_csv))?;
            }
            w.flush().map_err(io_err(path))?;
        }
        HistoryFormat::Json => {
            let table = Table {
                columns: columns.iter().map(|c| c.to_string()).collect(),
                rows: rows.iter().map(|r| r.iter().map(Cell::to_json).collect()).collect(),
            };
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &table).map_err(|e| io_err(path)(e.into()))?;
            writeln!(w).map_err(io_err(path))?;
            w.flush().map_err(io_err(path))?;
        }
    }
    Ok(())
}

fn read_table(path: &Path, format: HistoryFormat, columns: &[&str], what: &'static str) -> Result<Vec<Vec<Cell>>, EvalError> {
    let file = File::open(path).map_err(io_err(path))?;
    let (header, rows): (Vec<String>, Vec<Vec<Cell>>) = match format {
        HistoryFormat::Csv => {
            let mut r = csv::Reader::from_reader(BufReader::new(file));
            let header = r.headers()?.iter().map(str::to_string).collect();
            let mut rows = Vec::new();
            for rec in r.records() {
                rows.push(rec?.iter().map(Cell::from_csv).collect());
            }
            (header, rows)
        }
        HistoryFormat::Json => {
            let t: Table =
                serde_json::from_reader(BufReader::new(file)).map_err(|e| parse_err(what, e.to_string()))?;
            let rows = t
                .rows
                .into_iter()
                .map(|r| r.into_iter().map(Cell::from_json).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| parse_err(what, m))?;
            (t.columns, rows)
        }
    };
    if header != columns {
        return Err(parse_err(what, format!("columns {header:?}, expected {columns:?}")));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
        return Err(parse_err(what, format!("row with {} cells", bad.len())));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Num(Option<f64>),
    Text(String),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            // `{}` prints the shortest string that parses back to the same f64
            Cell::Num(Some(v)) => format!("{v}"),
            Cell::Num(None) => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Num(Some(v)) => serde_json::json!(v),
            Cell::Num(None) => serde_json::Value::Null,
            Cell::Text(s) => serde_json::Value::String(s.clone()),
        }
    }

    fn from_csv(s: &str) -> Cell {
        if s.is_empty() {
            Cell::Num(None)
        } else {
            s.parse().map_or_else(|_| Cell::Text(s.to_string()), |v| Cell::Num(Some(v)))
        }
    }

    fn from_json(v: serde_json::Value) -> Result<Cell, String> {
        match v {
            serde_json::Value::Null => Ok(Cell::Num(None)),
            serde_json::Value::Number(n) => n.as_f64().map(|v| Cell::Num(Some(v))).ok_or_else(|| n.to_string()),
            serde_json::Value::String(s) => Ok(Cell::Text(s)),
            other => Err(format!("unexpected cell {other}")),
        }
    }

    fn num(&self) -> Result<Option<f64>, String> {
        match self {
            Cell::Num(v) => Ok(*v),
            Cell::Text(s) => Err(format!("`{s}` is not a number")),
        }
    }
}

fn metrics_cells(m: Option<&EpochMetrics>) -> [Cell; 5] {
    let f = |g: fn(&EpochMetrics) -> f64| Cell::Num(m.map(g));
    [
        f(|m| m.loss),
        f(|m| m.accuracy),
        f(|m| m.precision_macro),
        f(|m| m.recall_macro),
        f(|m| m.f1_macro),
    ]
}

fn metrics_from(cells: &[Cell]) -> Result<Option<EpochMetrics>, String> {
    let v = cells.iter().map(Cell::num).collect::<Result<Vec<_>, _>>()?;
    if v.iter().all(Option::is_none) {
        return Ok(None);
    }
    let g = |i: usize| v[i].ok_or_else(|| "partially empty metrics".to_string());
    Ok(Some(EpochMetrics {
        loss: g(0)?,
        accuracy: g(1)?,
        precision_macro: g(2)?,
        recall_macro: g(3)?,
        f1_macro: g(4)?,
    }))
}

/// One row per epoch in [`HISTORY_COLUMNS`] order; missing validation
/// metrics are left empty (CSV) or null (JSON).
pub fn emit_history(h: &EpochHistory, path: impl AsRef<Path>, format: HistoryFormat) -> Result<(), EvalError> {
    if h.is_empty() {
        return Err(EvalError::Empty);
    }
    let rows: Vec<Vec<Cell>> = h
        .records
        .iter()
        .map(|r| {
            let mut row = vec![Cell::Num(Some(r.epoch as f64))];
            row.extend(metrics_cells(Some(&r.train)));
            row.extend(metrics_cells(r.val.as_ref()));
            row
        })
        .collect();
    write_table(path.as_ref(), format, &HISTORY_COLUMNS, &rows)
}

pub fn read_history(path: impl AsRef<Path>, format: HistoryFormat) -> Result<EpochHistory, EvalError> {
    let rows = read_table(path.as_ref(), format, &HISTORY_COLUMNS, "history")?;
    let records = rows
        .iter()
        .map(|r| -> Result<EpochRecord, String> {
            let epoch = r[0].num()?.ok_or("missing epoch")?;
            Ok(EpochRecord {
                epoch: epoch as usize,
                train: metrics_from(&r[1..6])?.ok_or("missing training metrics")?,
                val: metrics_from(&r[6..11])?,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|m| parse_err("history", m))?;
    Ok(EpochHistory { records })
}

/// Summary row per swept value, in [`SWEEP_COLUMNS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub final_loss: f64,
    pub val_loss: f64,
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub binary_output_accuracy: Option<f64>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.entries
            .iter()
            .map(|e| SweepRow {
                value: e.value,
                final_loss: e.final_loss,
                val_loss: e.final_val_loss,
                accuracy: e.report.accuracy,
                precision_macro: e.report.precision_macro,
                recall_macro: e.report.recall_macro,
                f1_macro: e.report.f1_macro,
                precision_weighted: e.report.precision_weighted,
                recall_weighted: e.report.recall_weighted,
                f1_weighted: e.report.f1_weighted,
                binary_output_accuracy: e.report.binary_output_accuracy,
            })
            .collect()
    }
}

pub fn emit_sweep(s: &SweepResult, path: impl AsRef<Path>, format: HistoryFormat) -> Result<(), EvalError> {
    if s.entries.is_empty() {
        return Err(EvalError::Empty);
    }
    let rows: Vec<Vec<Cell>> = s
        .rows()
        .into_iter()
        .map(|r| {
            let mut row = vec![Cell::Text(s.parameter.name().to_string())];
            row.extend(
                [
                    r.value,
                    r.final_loss,
                    r.val_loss,
                    r.accuracy,
                    r.precision_macro,
                    r.recall_macro,
                    r.f1_macro,
                    r.precision_weighted,
                    r.recall_weighted,
                    r.f1_weighted,
                ]
                .map(|v| Cell::Num(Some(v))),
            );
            row.push(Cell::Num(r.binary_output_accuracy));
            row
        })
        .collect();
    write_table(path.as_ref(), format, &SWEEP_COLUMNS, &rows)
}

pub fn read_sweep(path: impl AsRef<Path>, format: HistoryFormat) -> Result<(SweepParameter, Vec<SweepRow>), EvalError> {
    let rows = read_table(path.as_ref(), format, &SWEEP_COLUMNS, "sweep")?;
    let mut parameter = None;
    let mut out = Vec::new();
    for r in &rows {
        let p: SweepParameter = match &r[0] {
            Cell::Text(s) => s.parse().map_err(|m: String| parse_err("sweep", m))?,
            _ => return Err(parse_err("sweep", "missing parameter name")),
        };
        if parameter.is_some_and(|q| q != p) {
            return Err(parse_err("sweep", "mixed parameters"));
        }
        parameter = Some(p);
        let v = r[1..]
            .iter()
            .map(Cell::num)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| parse_err("sweep", m))?;
        let g = |i: usize| v[i].ok_or_else(|| parse_err("sweep", format!("empty `{}`", SWEEP_COLUMNS[i + 1])));
        out.push(SweepRow {
            value: g(0)?,
            final_loss: g(1)?,
            val_loss: g(2)?,
            accuracy: g(3)?,
            precision_macro: g(4)?,
            recall_macro: g(5)?,
            f1_macro: g(6)?,
            precision_weighted: g(7)?,
            recall_weighted: g(8)?,
            f1_weighted: g(9)?,
            binary_output_accuracy: v[10],
        });
    }
    let parameter = parameter.ok_or(EvalError::Empty)?;
    Ok((parameter, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{compute_metrics, confusion, SweepEntry};

    fn history(n: usize, with_val: bool) -> EpochHistory {
        let m = |k: f64| EpochMetrics {
            loss: 1.0 / (k + 3.0),
            accuracy: 0.1 * k + 1e-17,
            precision_macro: std::f64::consts::PI / (k + 7.0),
            recall_macro: 0.3,
            f1_macro: 2.0f64.sqrt() / (k + 2.0),
        };
        EpochHistory {
            records: (1..=n)
                .map(|e| EpochRecord {
                    epoch: e,
                    train: m(e as f64),
                    val: with_val.then(|| m(e as f64 + 0.5)),
                })
                .collect(),
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let h = history(10, true);
        emit_history(&h, &p, HistoryFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], HISTORY_COLUMNS.join(","));
        assert_eq!(read_history(&p, HistoryFormat::Csv).unwrap(), h);
    }

    #[test]
    fn json_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.json");
        for h in [history(3, true), history(4, false)] {
            emit_history(&h, &p, HistoryFormat::Json).unwrap();
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
            assert_eq!(v["columns"], serde_json::json!(HISTORY_COLUMNS));
            assert_eq!(v["rows"].as_array().unwrap().len(), h.len());
            assert_eq!(read_history(&p, HistoryFormat::Json).unwrap(), h);
        }
    }

    #[test]
    fn missing_validation_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let h = history(2, false);
        emit_history(&h, &p, HistoryFormat::Csv).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().lines().nth(1).unwrap().ends_with(",,,,,"));
        assert_eq!(read_history(&p, HistoryFormat::Csv).unwrap(), h);
    }

    #[test]
    fn empty_history_and_bad_path() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_history(&EpochHistory::default(), dir.path().join("x.csv"), HistoryFormat::Csv),
            Err(EvalError::Empty)
        ));
        assert!(matches!(
            emit_history(&history(1, true), dir.path().join("no/such/dir.csv"), HistoryFormat::Csv),
            Err(EvalError::Io { .. })
        ));
    }

    #[test]
    fn sweep_round_trip() {
        let report = compute_metrics(&confusion(&[0, 1, 1, 2], &[0, 1, 2, 2]).unwrap()).unwrap();
        let s = SweepResult {
            parameter: SweepParameter::BatchSize,
            entries: [8.0, 296.0]
                .iter()
                .map(|&v| SweepEntry {
                    value: v,
                    report: report.clone(),
                    final_loss: 1.0 / v,
                    final_val_loss: 0.1 + 1.0 / 3.0,
                    history: history(2, true),
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        for f in [HistoryFormat::Csv, HistoryFormat::Json] {
            let p = dir.path().join(format!("s.{f}"));
            emit_sweep(&s, &p, f).unwrap();
            let (param, rows) = read_sweep(&p, f).unwrap();
            assert_eq!(param, SweepParameter::BatchSize);
            assert_eq!(rows, s.rows());
        }
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
        assert_eq!(text.lines().count(), 3);
    }
}
