//! Lossless text output: every float is printed with 17 significant digits.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// `v` with 17 significant digits (`1.2345678901234567e-3`), enough to
/// round-trip any double. Non-finite values print as `inf`, `-inf`, `nan`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Pretty JSON with floats through [`fmt17`]. Non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| {
        for _ in 0..d {
            out.push_str("  ");
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) if !n.is_f64() => write!(out, "{u}").unwrap(),
            (_, Some(i)) if !n.is_f64() => write!(out, "{i}").unwrap(),
            _ => out.push_str(&fmt17(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|i| !i.is_object() && !i.is_array()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, depth);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, item, depth + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 0.087_176_693_572_388_86, 1e-300, 5e-324, 123456.0] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            let digits: String = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect();
            assert_eq!(digits.len(), 17);
        }
        assert_eq!(fmt17(f64::INFINITY), "inf");
    }

    #[test]
    fn json_floats_and_integers() {
        #[derive(Serialize)]
        struct R {
            t: u32,
            p: f64,
            xs: Vec<f64>,
            name: &'static str,
        }
        let s = to_json(&R {
            t: 7,
            p: 0.1,
            xs: vec![0.5],
            name: "a\"b",
        });
        assert!(s.contains("\"t\": 7,"));
        assert!(s.contains("\"p\": 1.0000000000000001e-1,"));
        assert!(s.contains("[5.0000000000000000e-1]"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["p"].as_f64(), Some(0.1));
        assert_eq!(back["name"], "a\"b");
    }
}
