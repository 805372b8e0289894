//! Canonical JSON text: sorted keys, two-space indentation, floats with 17
//! significant digits. Emitting, parsing and emitting again is byte-identical.

use serde_json::{Map, Value};

/// Fixed notation is used for magnitudes in `[1e-4, 1e6)`.
const FIXED_MIN_EXP: i32 = -4;
const FIXED_MAX_EXP: i32 = 5;

/// 17 significant digits; `0.0` for zero, exponent form outside the fixed range.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(FIXED_MIN_EXP..=FIXED_MAX_EXP).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    if exp >= 0 {
        let split = exp as usize + 1;
        format!("{sign}{}.{}", &digits[..split], &digits[split..])
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    }
}

/// Canonical text of `value`, newline-terminated.
pub fn to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

/// Parses JSON text; floats round-trip exactly.
pub fn parse(text: &str) -> serde_json::Result<Value> {
    serde_json::from_str(text)
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

/// Arrays of scalars and arrays of arrays of scalars (matrix rows) stay on one line.
fn is_inline(items: &[Value]) -> bool {
    items.iter().all(|v| match v {
        Value::Array(inner) => inner.iter().all(is_scalar),
        other => is_scalar(other),
    })
}

fn indent(out: &mut String, level: usize) {
    out.push('\n');
    out.push_str(&"  ".repeat(level));
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().expect("finite number")));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if is_inline(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, level);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, level + 1);
                write_value(out, item, level + 1);
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => write_object(out, map, level),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>, level: usize) {
    if map.is_empty() {
        out.push_str("{}");
        return;
    }
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    out.push('{');
    for (i, key) in keys.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        indent(out, level + 1);
        out.push_str(&serde_json::to_string(key).expect("string serializes"));
        out.push_str(": ");
        write_value(out, &map[key], level + 1);
    }
    indent(out, level);
    out.push('}');
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn float_formats() {
        assert_eq!(format_float(0.0), "0.0");
        assert_eq!(format_float(-0.0), "0.0");
        assert_eq!(format_float(0.75), "0.75000000000000000");
        assert_eq!(format_float(2.0), "2.0000000000000000");
        assert_eq!(format_float(-123.5), "-123.50000000000000");
        assert_eq!(format_float(1e-4), "0.00010000000000000000");
        assert_eq!(format_float(999999.5), "999999.50000000000");
        assert_eq!(format_float(1e6), "1.0000000000000000e6");
        assert_eq!(format_float(3e-5), "3.0000000000000001e-5");
        assert_eq!(format_float(0.5f64.powi(20)), "9.5367431640625000e-7");
        assert_eq!(format_float(0.1), "0.10000000000000001");
    }

    #[test]
    fn floats_round_trip() {
        let samples = [
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            -2.5e-7,
            123456.78901234567,
            f64::MAX,
            f64::MIN_POSITIVE,
            9.999999999999999e5,
        ];
        for x in samples {
            let text = format_float(x);
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{text}");
            let v: Value = parse(&text).unwrap();
            assert_eq!(v.as_f64().unwrap().to_bits(), x.to_bits(), "{text}");
        }
    }

    #[test]
    fn documents_round_trip() {
        let doc = json!({
            "zeta": [1, 2, 3],
            "alpha": {"b": 0.5, "a": [[0.25, -1e-9], [3.0, 0.0]]},
            "name": "qchan \"quoted\"",
            "flag": true,
            "none": null,
            "empty": [],
            "objects": [{"x": 1.0}, {"y": -2}],
        });
        let text = to_string(&doc);
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert_eq!(to_string(&parse(&text).unwrap()), text);
        assert!(text.contains("[[0.25000000000000000, -1.0000000000000001e-9], [3.0000000000000000, 0.0]]"));
    }
}
