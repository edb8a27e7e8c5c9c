//! Deterministic JSON output: keys sorted, floats with 17 significant digits.

use pencil_transit::{TransitionMatrix2, C64};
use serde_json::{json, Map, Number, Value};
use std::fmt::Write;

/// `[re, im]`.
pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Non-finite values become `null`.
pub fn real(x: f64) -> Value {
    Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn matrix(t: &TransitionMatrix2) -> Value {
    let mut m = Map::new();
    m.insert(
        "entries".into(),
        Value::Array(t.t.iter().map(|r| Value::Array(r.iter().map(|z| complex(*z)).collect())).collect()),
    );
    m.insert(
        "abs".into(),
        Value::Array(t.abs().iter().map(|r| Value::Array(r.iter().map(|x| real(*x)).collect())).collect()),
    );
    m.insert("convention".into(), json!(t.convention.as_str()));
    m.insert("nu".into(), complex(t.nu));
    m.insert("w".into(), json!(t.w));
    m.insert("det".into(), complex(t.det()));
    Value::Object(m)
}

fn float(x: f64, out: &mut String) {
    if x == 0.0 {
        out.push_str("0.0");
    } else {
        let _ = write!(out, "{x:.16e}");
    }
}

fn string(s: &str, out: &mut String) {
    out.push_str(&Value::String(s.to_string()).to_string());
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', 2 * n));
    match v {
        Value::Null | Value::Bool(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) if !n.is_f64() => {
                let _ = write!(out, "{i}");
            }
            (_, Some(u), _) if !n.is_f64() => {
                let _ = write!(out, "{u}");
            }
            (_, _, Some(f)) => float(f, out),
            _ => out.push_str("null"),
        },
        Value::String(s) => string(s, out),
        Value::Array(a) => {
            if a.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write(x, indent, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(indent + 1, out);
                write(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(indent + 1, out);
                string(k, out);
                out.push_str(": ");
                write(&m[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

/// Pretty, byte-stable rendering.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}
