//! Deterministic JSON and CSV rendering.
//!
//! Every floating-point number is rounded to 12 significant digits before it
//! is written, so identical inputs give byte-identical output.

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{Error, Result};

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let s = format!("{x:.11e}");
    s.parse().unwrap_or(x)
}

/// Applies [`sig12`] to every float in a JSON tree.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(sig12(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v)
        .map(round_floats)
        .map_err(|e| Error::Output(e.to_string()))
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    pretty(&to_value(v)?)
}

/// Pretty JSON with a trailing newline, floats written as given.
pub fn pretty(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// CSV cell for a float: 12 significant digits, empty for missing values.
pub fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v == 0.0 || (1e-4..1e15).contains(&v.abs()) => format!("{}", sig12(v)),
        Some(v) if v.is_finite() => format!("{:e}", sig12(v)),
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{LogMagnitude, StepCount};
    use serde_json::json;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(sig12(0.1 + 0.2), 0.3);
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(-123456789012345.0), -123456789012000.0);
        assert_eq!(sig12(0.0), 0.0);
        assert!(sig12(f64::NAN).is_nan());
    }

    #[test]
    fn json_rounds_nested_floats_and_keeps_big_integers() {
        let v = to_value(&json!({"a": [0.1 + 0.2, 1], "b": {"c": 2.0 / 3.0}})).unwrap();
        assert_eq!(v, json!({"a": [0.3, 1], "b": {"c": 0.666666666667}}));
        let big = StepCount(5_837_746_750_420_950_850_884_158_035_391_110);
        assert_eq!(
            to_json(&big).unwrap(),
            "5837746750420950850884158035391110\n"
        );
    }

    #[test]
    fn magnitudes_serialize_with_decimal_exponent() {
        let v = to_value(&LogMagnitude::from_log10(33.5)).unwrap();
        assert_eq!(v["exponent"], json!(33));
        assert_eq!(v["mantissa"], json!(3.16227766017));
    }

    #[test]
    fn csv_cells() {
        let s = to_csv(
            &["l", "v"],
            &[
                vec!["1".into(), cell(Some(0.1 + 0.2))],
                vec!["2".into(), cell(None)],
            ],
        )
        .unwrap();
        assert_eq!(s, "l,v\n1,0.3\n2,\n");
        assert_eq!(cell(Some(7.62939453125e-6)), "7.62939453125e-6");
        assert_eq!(cell(Some(2.0 / 3.0 * 1e20)), "6.66666666667e19");
        assert_eq!(cell(Some(0.0)), "0");
    }
}
