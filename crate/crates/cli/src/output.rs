//! Deterministic text output: every float is written with six decimals.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Float cell text; `None` is an empty cell.
pub fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn fixed_opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

/// Pretty JSON with fixed-precision floats and sorted object keys.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::internal(format!("serialize: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fixed(n.as_f64().expect("f64 number")));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // short scalar arrays stay on one line
            if items.len() <= 8 && items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, item, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (k, key) in keys.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[key.as_str()], indent + 1);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    out.push_str(&"  ".repeat(indent));
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

/// CSV text from a header and string rows.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| CliError::internal(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::internal(format!("csv: {e}")))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    write_text(path, &to_csv(header, rows)?)
}
