//! Deterministic JSON reports and CSV sidecars.
//!
//! Reports are built as `serde_json::Value` trees. Object keys are kept in a
//! `BTreeMap`, so serialization is key-sorted, and floats are printed in the
//! shortest form that round-trips (at most 17 significant digits).
//! Non-finite floats are written as the strings `"inf"`, `"-inf"`, `"nan"`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Serializes a float, writing non-finite values as strings.
pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(non_finite_name(*v))
    }
}

pub fn ser_vector<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| float_value(*x)))
}

fn non_finite_name(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

pub fn float_value(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(non_finite_name(v).into()))
}

/// Converts anything serializable into a `Value`.
pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values are always representable")
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub command: String,
    pub form: Option<String>,
    pub parameters: BTreeMap<String, Value>,
    pub results: Value,
    /// Overall verdict of the requested checks.
    pub passed: bool,
    pub version: String,
    pub duration_seconds: f64,
}

impl AnalysisReport {
    pub fn new(command: &str, form: Option<String>) -> Self {
        Self {
            command: command.to_string(),
            form,
            parameters: BTreeMap::new(),
            results: Value::Null,
            passed: true,
            version: TOOL_VERSION.to_string(),
            duration_seconds: 0.0,
        }
    }

    pub fn param<T: Serialize>(&mut self, key: &str, value: T) -> &mut Self {
        self.parameters.insert(key.to_string(), to_value(&value));
        self
    }

    /// Key-sorted, pretty-printed UTF-8 JSON followed by a newline.
    pub fn serialize(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&to_value(self)).expect("value serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// Writes `header` and `rows` as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), ReportError> {
    let io = |e: &dyn std::fmt::Display| ReportError::Io { path: path.display().to_string(), reason: e.to_string() };
    let mut writer = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    writer.write_record(header).map_err(|e| io(&e))?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| format_csv_float(*v)).collect();
        writer.write_record(&fields).map_err(|e| io(&e))?;
    }
    writer.flush().map_err(|e| io(&e))
}

fn format_csv_float(v: f64) -> String {
    if v.is_finite() {
        // Display for f64 is the shortest round-trip representation.
        format!("{v}")
    } else {
        non_finite_name(v).to_string()
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| ReportError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    file.write_all(bytes).map_err(|e| ReportError::Io { path: path.display().to_string(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AnalysisReport {
        let mut r = AnalysisReport::new("verify", Some("cartan:1".into()));
        r.param("seed", 7u64).param("tol", 1e-9).param("alpha", 1.0);
        r.results = serde_json::json!({"zeta": 0.5, "alpha": [1.0, float_value(f64::INFINITY)], "mid": {"b": 1, "a": 2}});
        r
    }

    #[test]
    fn serialization_is_reproducible_and_sorted() {
        let a = sample().serialize();
        let b = sample().serialize();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let command = text.find("\"command\"").unwrap();
        let parameters = text.find("\"parameters\"").unwrap();
        let version = text.find("\"version\"").unwrap();
        assert!(command < parameters && parameters < version);
        assert!(text.find("\"a\": 2").unwrap() < text.find("\"b\": 1").unwrap());
        assert!(text.contains("\"inf\""));
    }

    #[test]
    fn floats_use_shortest_round_trip() {
        assert_eq!(serde_json::to_string(&float_value(0.5)).unwrap(), "0.5");
        assert_eq!(serde_json::to_string(&float_value(0.1)).unwrap(), "0.1");
        let third = 1.0 / 3.0;
        let text = serde_json::to_string(&float_value(third)).unwrap();
        assert_eq!(text.parse::<f64>().unwrap(), third);
        assert_eq!(serde_json::to_string(&float_value(f64::NAN)).unwrap(), "\"nan\"");
    }

    #[test]
    fn csv_sidecar_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        write_csv(&path, &["pair_index", "lambda_min", "lambda_max", "M"], &[vec![0.0, -1.0, 2.0, 2.0], vec![1.0, 1.0, 2.0, f64::INFINITY]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("pair_index,lambda_min,lambda_max,M"));
        assert_eq!(lines.next(), Some("0,-1,2,2"));
        assert_eq!(lines.next(), Some("1,1,2,inf"));
    }
}
