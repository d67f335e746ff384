//! JSON helpers and the plain-text view of a report.

use num_complex::Complex64;
use serde_json::{json, Value};

use friedrichs_core::linalg::CMatrix;
use friedrichs_core::trace_space::TraceForm;

pub fn complex_json(z: Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

/// Row-major nested arrays of `{re, im}`.
pub fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Basis columns as full trace vectors `(u(a), u(b))`, deleted coordinates zero.
pub fn trace_basis_json(form: &TraceForm, basis: &CMatrix) -> Value {
    Value::Array(
        (0..basis.ncols())
            .map(|j| {
                let col: Vec<Complex64> = basis.column(j).iter().copied().collect();
                Value::Array(form.expand_vector(&col).into_iter().map(complex_json).collect())
            })
            .collect(),
    )
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Object(map) if map.len() == 2 && map.contains_key("re") && map.contains_key("im") => {
            let re = map["re"].as_f64()?;
            let im = map["im"].as_f64()?;
            Some(if im == 0.0 { format!("{re}") } else { format!("{re}{im:+}i") })
        }
        Value::Array(items) => {
            let parts: Option<Vec<String>> = items
                .iter()
                .map(|x| if x.is_array() && !is_flat(x) { None } else { scalar(x) })
                .collect();
            parts.map(|p| format!("[{}]", p.join(", ")))
        }
        Value::Object(_) => None,
    }
}

fn is_flat(v: &Value) -> bool {
    matches!(v, Value::Array(items) if items.iter().all(|x| !x.is_array() && scalar(x).is_some()))
}

fn walk(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            let width = map.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, x) in map {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}{k:<width$}  {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        walk(x, indent + 1, out);
                    }
                }
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                match scalar(x) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}- [{i}]\n"));
                        walk(x, indent + 1, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}

/// Aligned `key  value` lines, nested objects indented.
pub fn text(doc: &Value) -> String {
    let mut out = String::new();
    walk(doc, 0, &mut out);
    out
}
