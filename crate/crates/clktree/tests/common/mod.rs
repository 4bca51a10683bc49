//! Minimal JSON-Schema checker covering the subset used by the shipped
//! schemas: type, enum, required, properties, additionalProperties, items.

use serde_json::Value;

pub fn validate(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(types) = schema.get("type") {
        let allowed: Vec<&str> = match types {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(|v| v.as_str()).collect(),
            _ => vec![],
        };
        let actual = type_name(value);
        if !allowed.iter().any(|t| *t == actual || (*t == "number" && actual == "integer")) {
            errors.push(format!("{path}: expected {allowed:?}, got {actual}"));
            return;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errors.push(format!("{path}: {value} not in {options:?}"));
        }
    }
    if let Value::Object(map) = value {
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    errors.push(format!("{path}: missing required '{key}'"));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        let closed = schema.get("additionalProperties") == Some(&Value::Bool(false));
        for (key, sub) in map {
            match props.and_then(|p| p.get(key)) {
                Some(subschema) => validate(subschema, sub, &format!("{path}.{key}"), errors),
                None if closed => errors.push(format!("{path}: unexpected '{key}'")),
                None => {}
            }
        }
    }
    if let (Value::Array(items), Some(item_schema)) = (value, schema.get("items")) {
        for (i, item) in items.iter().enumerate() {
            validate(item_schema, item, &format!("{path}[{i}]"), errors);
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

pub fn check(schema_text: &str, value: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(schema_text).expect("schema parses");
    let mut errors = Vec::new();
    validate(&schema, value, "$", &mut errors);
    errors
}
