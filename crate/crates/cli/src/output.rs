//! JSON and CSV serialization of reports.

use serde_json::{Map, Value};

use crate::run::{Failure, Report, Row};

pub const ROW_COLUMNS: [&str; 10] = [
    "theta",
    "c",
    "T",
    "method",
    "regime",
    "rate",
    "probability",
    "log_probability",
    "error_estimate",
    "error",
];

pub fn version_stamp() -> String {
    format!("ou-sldp {}", env!("CARGO_PKG_VERSION"))
}

/// Report fields followed by the version stamp and the config that produced them.
pub fn json_report(report: &Report, config: &Value) -> String {
    let mut m = report.fields.clone();
    m.insert("version".into(), Value::String(version_stamp()));
    m.insert("config".into(), config.clone());
    Value::Object(m).to_string()
}

pub fn json_failure(f: &Failure, config: Option<&Value>) -> String {
    let mut m = Map::new();
    m.insert("error".into(), Value::String(f.reason.clone()));
    m.insert("message".into(), Value::String(f.message.clone()));
    if let Some(r) = f.regime {
        m.insert("regime".into(), Value::String(r.name().into()));
    }
    m.insert("version".into(), Value::String(version_stamp()));
    if let Some(c) = config {
        m.insert("config".into(), c.clone());
    }
    Value::Object(m).to_string()
}

/// Floats with 17 significant digits; missing values are empty cells.
fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

/// RFC 4180 quoting.
fn cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn line(cells: &[String]) -> String {
    cells.iter().map(|c| cell(c)).collect::<Vec<_>>().join(",")
}

fn row_cells(r: &Row) -> Vec<String> {
    vec![
        num(Some(r.theta)),
        num(Some(r.c)),
        num(Some(r.t)),
        r.method.clone(),
        r.regime.map(|g| g.name().to_string()).unwrap_or_default(),
        num(r.rate),
        num(r.probability),
        num(r.log_probability),
        num(r.error_estimate),
        r.error.clone().unwrap_or_default(),
    ]
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Number(n) => {
            let s = match (n.as_i64(), n.as_u64()) {
                (Some(i), _) => i.to_string(),
                (_, Some(u)) => u.to_string(),
                _ => num(n.as_f64()),
            };
            out.push((prefix.into(), s));
        }
        Value::String(s) => out.push((prefix.into(), s.clone())),
        Value::Bool(b) => out.push((prefix.into(), b.to_string())),
        Value::Null => out.push((prefix.into(), String::new())),
        Value::Array(_) => out.push((prefix.into(), v.to_string())),
    }
}

/// Probability-valued commands emit the row schema; the rest emit their
/// fields flattened into one row with dotted column names.
pub fn csv_report(report: &Report) -> String {
    let mut s = String::new();
    match &report.rows {
        Some(rows) => {
            s.push_str(&ROW_COLUMNS.join(","));
            s.push('\n');
            for r in rows {
                s.push_str(&line(&row_cells(r)));
                s.push('\n');
            }
        }
        None => {
            let mut cols = Vec::new();
            flatten("", &Value::Object(report.fields.clone()), &mut cols);
            let (keys, vals): (Vec<String>, Vec<String>) = cols.into_iter().unzip();
            s.push_str(&line(&keys));
            s.push('\n');
            s.push_str(&line(&vals));
            s.push('\n');
        }
    }
    s
}

pub fn csv_failure(f: &Failure) -> String {
    format!(
        "error,message\n{}\n",
        line(&[f.reason.clone(), f.message.clone()])
    )
}
