//! Mapping between runtime values and JSON at unit boundaries.
//!
//! Tuples become arrays and objects become their attribute maps, so a value
//! that crossed once is a fixed point for every later crossing.

use std::rc::Rc;

use indexmap::IndexMap;
use num_bigint::BigInt;
use serde_json::{Map as JsonMap, Number, Value as Json};

use super::value::{Int, Value};

/// Deepest nesting accepted; also stops self-referential lists.
const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JsonError {
    #[error("object of type {0} is not JSON serializable")]
    NotSerializable(&'static str),
    #[error("out of range float values are not JSON compliant: {0}")]
    NonFinite(f64),
    #[error("value nested too deeply for JSON")]
    TooDeep,
    #[error("invalid JSON: {0}")]
    Syntax(String),
}

pub fn to_json(value: &Value) -> Result<Json, JsonError> {
    encode(value, 0)
}

fn encode(value: &Value, depth: usize) -> Result<Json, JsonError> {
    if depth > MAX_DEPTH {
        return Err(JsonError::TooDeep);
    }
    Ok(match value {
        Value::None => Json::Null,
        Value::Bool(b) => Json::Bool(*b),
        Value::Int(i) => Json::Number(int_number(i)),
        Value::Float(f) => Json::Number(Number::from_f64(*f).ok_or(JsonError::NonFinite(*f))?),
        Value::Str(s) => Json::String(s.to_string()),
        Value::List(items) => Json::Array(
            items
                .borrow()
                .iter()
                .map(|v| encode(v, depth + 1))
                .collect::<Result<_, _>>()?,
        ),
        Value::Tuple(items) => Json::Array(items.iter().map(|v| encode(v, depth + 1)).collect::<Result<_, _>>()?),
        Value::Map(items) => encode_map(&items.borrow(), depth)?,
        Value::Object(obj) => encode_map(&obj.attrs.borrow(), depth)?,
        other => return Err(JsonError::NotSerializable(other.type_name())),
    })
}

fn encode_map(items: &IndexMap<String, Value>, depth: usize) -> Result<Json, JsonError> {
    let mut out = JsonMap::new();
    for (k, v) in items {
        out.insert(k.clone(), encode(v, depth + 1)?);
    }
    Ok(Json::Object(out))
}

fn int_number(i: &Int) -> Number {
    match i {
        Int::Small(v) => Number::from(*v),
        Int::Big(v) => v.to_string().parse().expect("integer literal is a JSON number"),
    }
}

pub fn from_json(json: &Json) -> Value {
    match json {
        Json::Null => Value::None,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => {
            let text = n.to_string();
            if text.contains(['.', 'e', 'E']) {
                Value::Float(text.parse().unwrap_or(f64::NAN))
            } else {
                let big: BigInt = text.parse().expect("integral JSON number");
                Value::Int(Int::from_big(big))
            }
        }
        Json::String(s) => Value::Str(Rc::from(s.as_str())),
        Json::Array(items) => Value::list(items.iter().map(from_json).collect()),
        Json::Object(items) => Value::map(items.iter().map(|(k, v)| (k.clone(), from_json(v))).collect()),
    }
}

pub fn to_json_text(value: &Value) -> Result<String, JsonError> {
    Ok(to_json(value)?.to_string())
}

pub fn from_json_text(text: &str) -> Result<Value, JsonError> {
    let json: Json = serde_json::from_str(text).map_err(|e| JsonError::Syntax(e.to_string()))?;
    Ok(from_json(&json))
}

/// Best-effort JSON view used for reporting results; values without a JSON
/// form are replaced by their `repr` text.
pub fn to_json_lossy(value: &Value) -> Json {
    match to_json(value) {
        Ok(j) => j,
        Err(_) => match value {
            Value::List(items) => Json::Array(items.borrow().iter().map(to_json_lossy).collect()),
            Value::Tuple(items) => Json::Array(items.iter().map(to_json_lossy).collect()),
            Value::Map(items) => Json::Object(
                items
                    .borrow()
                    .iter()
                    .map(|(k, v)| (k.clone(), to_json_lossy(v)))
                    .collect(),
            ),
            other => Json::String(other.repr()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross(v: &Value) -> Value {
        from_json_text(&to_json_text(v).unwrap()).unwrap()
    }

    #[test]
    fn tuple_becomes_list_then_stays() {
        let t = Value::Tuple(Rc::from(vec![Value::int(1), Value::int(2)]));
        let once = cross(&t);
        assert!(matches!(once, Value::List(_)));
        assert_eq!(to_json_text(&once).unwrap(), "[1,2]");
        assert!(cross(&once).py_eq(&once));
    }

    #[test]
    fn numbers_keep_their_kind() {
        assert!(matches!(cross(&Value::Float(1.0)), Value::Float(f) if f == 1.0));
        assert!(matches!(cross(&Value::int(7)), Value::Int(Int::Small(7))));
        let big = Value::Int(Int::from_big("123456789012345678901234567890".parse().unwrap()));
        assert_eq!(to_json_text(&big).unwrap(), "123456789012345678901234567890");
        assert!(cross(&big).py_eq(&big));
        assert!(matches!(cross(&Value::Float(1e300)), Value::Float(f) if f == 1e300));
    }

    #[test]
    fn rejects_what_json_cannot_hold() {
        assert_eq!(
            to_json(&Value::Float(f64::NAN)).unwrap_err().to_string(),
            "out of range float values are not JSON compliant: NaN"
        );
        let l = Value::list(vec![]);
        if let Value::List(inner) = &l {
            inner.borrow_mut().push(l.clone());
        }
        assert_eq!(to_json(&l), Err(JsonError::TooDeep));
        if let Value::List(inner) = &l {
            inner.borrow_mut().clear();
        }
    }

    #[test]
    fn key_order_is_preserved() {
        let v = from_json_text(r#"{"b": 1, "a": [true, null, "x"]}"#).unwrap();
        assert_eq!(to_json_text(&v).unwrap(), r#"{"b":1,"a":[true,null,"x"]}"#);
    }
}
