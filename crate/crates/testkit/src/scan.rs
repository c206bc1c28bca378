//! Finds answer-bearing keys anywhere inside a JSON document.

use serde_json::Value;

/// Keys under which authored answers live in banks and questions.
pub const ANSWER_KEYS: &[&str] = &["correct", "answer", "tolerance", "category"];

/// JSON paths of every object key in `value` that is in `forbidden`.
pub fn find_keys(value: &Value, forbidden: &[&str]) -> Vec<String> {
    let mut hits = Vec::new();
    walk(value, "$", forbidden, &mut hits);
    hits
}

fn walk(value: &Value, path: &str, forbidden: &[&str], hits: &mut Vec<String>) {
    match value {
        Value::Object(map) => {
            for (key, child) in map {
                let child_path = format!("{path}.{key}");
                if forbidden.contains(&key.as_str()) {
                    hits.push(child_path.clone());
                }
                walk(child, &child_path, forbidden, hits);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk(child, &format!("{path}[{i}]"), forbidden, hits);
            }
        }
        _ => {}
    }
}
