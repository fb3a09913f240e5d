//! Byte-stable report output: floats rounded to 12 significant digits,
//! object keys sorted, fixed column order for tables.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Rows for CSV output, with their column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    /// Columns in the order of `fields`; each row is a serialized struct
    /// and list-valued fields are joined with `;`.
    pub fn from_rows<T: Serialize>(fields: &[&str], rows: &[T]) -> Self {
        let rows = rows
            .iter()
            .map(|r| {
                let v = serde_json::to_value(r).expect("row serializes");
                fields.iter().map(|f| v.get(*f).cloned().unwrap_or(Value::Null)).collect()
            })
            .collect();
        Self { header: fields.iter().map(|s| s.to_string()).collect(), rows }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    pub summary: String,
    pub pass: bool,
}

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Rounds every float and rebuilds objects so keys come out sorted.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => {
            let mut entries: Vec<(String, Value)> = o.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut m = Map::new();
            for (k, v) in entries {
                m.insert(k, normalize(v));
            }
            Value::Object(m)
        }
        other => other,
    }
}

fn cell(v: &Value) -> String {
    match normalize(v.clone()) {
        Value::Null => String::new(),
        Value::String(s) => s,
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

pub fn render_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&normalize(v.clone())).expect("json renders");
    s.push('\n');
    s
}

pub fn render_csv(table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Output { path: "<csv>".into(), reason: e.to_string() };
    w.write_record(&table.header).map_err(fail)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell)).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output { path: "<csv>".into(), reason: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// One-row table of the top-level scalar fields, for reports without rows.
fn scalar_table(v: &Value) -> Table {
    let mut header = Vec::new();
    let mut row = Vec::new();
    if let Value::Object(o) = normalize(v.clone()) {
        for (k, x) in o {
            if !x.is_object() && !(x.is_array() && x.as_array().is_some_and(|a| a.iter().any(|e| e.is_object()))) {
                header.push(k);
                row.push(x);
            }
        }
    }
    Table { header, rows: vec![row] }
}

/// Writes the report to `path`: CSV when the extension is `.csv`, JSON
/// otherwise. Nothing is written for an empty table.
pub fn write_report(report: &Report, path: &Path) -> Result<(), CliError> {
    let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let text = if csv {
        let table = report.table.clone().unwrap_or_else(|| scalar_table(&report.json));
        if table.rows.is_empty() || table.header.is_empty() {
            return Err(CliError::Output { path: path.display().to_string(), reason: "no rows to write".into() });
        }
        render_csv(&table)?
    } else {
        render_json(&report.json)
    };
    std::fs::write(path, text).map_err(|e| CliError::Output { path: path.display().to_string(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding_and_key_order() {
        assert_eq!(round_sig(1234.567890123456), 1234.56789012);
        assert_eq!(round_sig(0.0), 0.0);
        let v = json!({"b": 1.0000000000001, "a": [2.123456789012345, "x"]});
        assert_eq!(serde_json::to_string(&normalize(v)).unwrap(), r#"{"a":[2.12345678901,"x"],"b":1.0}"#);
    }

    #[test]
    fn csv_layout() {
        #[derive(Serialize)]
        struct Row {
            t: f64,
            xs: Vec<f64>,
        }
        let t = Table::from_rows(&["t", "xs"], &[Row { t: 0.5, xs: vec![1.0, 2.5] }]);
        assert_eq!(render_csv(&t).unwrap(), "t,xs\n0.5,1.0;2.5\n");
    }

    #[test]
    fn empty_rows_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let report = Report {
            json: json!({}),
            table: Some(Table { header: vec!["t".into()], rows: vec![] }),
            summary: String::new(),
            pass: true,
        };
        assert!(write_report(&report, &path).is_err());
        assert!(!path.exists());
    }
}
