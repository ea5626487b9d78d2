//! Line-delimited JSON trace records.
//!
//! Each record renders as
//! `{"time":<t with 6 decimals>,"node":<id or "-">,"event":"<TOKEN>","detail":{...}}`
//! with detail keys in insertion order. Metric values use the shortest
//! representation that round-trips; non-finite values render as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use std::fmt::Write as _;

use serde_json::Value as Json;
use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Num(f64),
    Str(String),
    Bool(bool),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v.into())
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

/// Ordered flat key/value map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detail(pub Vec<(String, Value)>);

impl Detail {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.push((key.to_owned(), value.into()));
        self
    }

    pub fn push(&mut self, key: &str, value: impl Into<Value>) {
        self.0.push((key.to_owned(), value.into()));
    }

    pub fn extend(mut self, other: Detail) -> Self {
        self.0.extend(other.0);
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(Value::as_f64)
    }

    pub fn i64(&self, key: &str) -> Option<i64> {
        self.get(key).and_then(Value::as_i64)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub node: Option<NodeId>,
    pub event: String,
    pub detail: Detail,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Shape { line: usize, message: String },
}

/// Rounds a simulation time to the resolution kept in traces.
pub fn trace_time(t: f64) -> f64 {
    format!("{t:.6}").parse().expect("formatted float parses")
}

pub fn path_string(path: &[NodeId]) -> String {
    path.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

pub fn parse_path(s: &str) -> Option<Vec<NodeId>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split('-').map(|p| p.parse().ok()).collect()
}

fn write_json_string(out: &mut String, s: &str) {
    out.push_str(&Json::String(s.to_owned()).to_string());
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Num(n) if n.is_nan() => out.push_str("\"nan\""),
        Value::Num(n) if n.is_infinite() => {
            out.push_str(if *n > 0.0 { "\"inf\"" } else { "\"-inf\"" })
        }
        Value::Num(n) => {
            let json = serde_json::Number::from_f64(*n).expect("finite float");
            let _ = write!(out, "{json}");
        }
        Value::Str(s) => write_json_string(out, s),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
    }
}

impl TraceRecord {
    pub fn new(time: f64, node: Option<NodeId>, event: &str, detail: Detail) -> Self {
        Self {
            time,
            node,
            event: event.to_owned(),
            detail,
        }
    }

    pub fn to_json_line(&self) -> String {
        let mut out = String::with_capacity(96);
        let _ = write!(out, "{{\"time\":{:.6},\"node\":", self.time);
        match self.node {
            Some(id) => {
                let _ = write!(out, "{id}");
            }
            None => out.push_str("\"-\""),
        }
        out.push_str(",\"event\":");
        write_json_string(&mut out, &self.event);
        out.push_str(",\"detail\":{");
        for (i, (k, v)) in self.detail.0.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_json_string(&mut out, k);
            out.push(':');
            write_value(&mut out, v);
        }
        out.push_str("}}");
        out
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<Self, TraceParseError> {
        let shape = |message: &str| TraceParseError::Shape {
            line: lineno,
            message: message.to_owned(),
        };
        let json: Json = serde_json::from_str(line).map_err(|source| TraceParseError::Json {
            line: lineno,
            source,
        })?;
        let obj = json.as_object().ok_or_else(|| shape("record is not an object"))?;
        let time = obj
            .get("time")
            .and_then(Json::as_f64)
            .ok_or_else(|| shape("missing time"))?;
        let node = match obj.get("node") {
            Some(Json::String(s)) if s == "-" => None,
            Some(n) => Some(
                n.as_u64()
                    .and_then(|n| NodeId::try_from(n).ok())
                    .ok_or_else(|| shape("bad node"))?,
            ),
            None => return Err(shape("missing node")),
        };
        let event = obj
            .get("event")
            .and_then(Json::as_str)
            .ok_or_else(|| shape("missing event"))?
            .to_owned();
        let mut detail = Detail::new();
        let map = obj
            .get("detail")
            .and_then(Json::as_object)
            .ok_or_else(|| shape("missing detail"))?;
        for (k, v) in map {
            let value = match v {
                Json::Bool(b) => Value::Bool(*b),
                Json::String(s) => match s.as_str() {
                    "inf" => Value::Num(f64::INFINITY),
                    "-inf" => Value::Num(f64::NEG_INFINITY),
                    "nan" => Value::Num(f64::NAN),
                    _ => Value::Str(s.clone()),
                },
                Json::Number(n) if n.is_i64() => Value::Int(n.as_i64().unwrap_or_default()),
                Json::Number(n) => Value::Num(n.as_f64().ok_or_else(|| shape("bad number"))?),
                _ => return Err(shape("nested detail value")),
            };
            detail.0.push((k.clone(), value));
        }
        Ok(TraceRecord {
            time,
            node,
            event,
            detail,
        })
    }
}

pub fn render(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| TraceRecord::parse_line(l, i + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_key_order_and_time_format() {
        let r = TraceRecord::new(
            5.0,
            Some(4),
            "NIT_SELECT",
            Detail::new()
                .with("sa", 1u32)
                .with("lsd", 20.0)
                .with("path", "1-4")
                .with("stable", f64::INFINITY),
        );
        assert_eq!(
            r.to_json_line(),
            r#"{"time":5.000000,"node":4,"event":"NIT_SELECT","detail":{"sa":1,"lsd":20.0,"path":"1-4","stable":"inf"}}"#
        );
        let anon = TraceRecord::new(0.1234567, None, "RUN_END", Detail::new());
        assert_eq!(
            anon.to_json_line(),
            r#"{"time":0.123457,"node":"-","event":"RUN_END","detail":{}}"#
        );
    }

    #[test]
    fn paths() {
        assert_eq!(path_string(&[1, 4, 8, 9, 6]), "1-4-8-9-6");
        assert_eq!(parse_path("1-2-3-6"), Some(vec![1, 2, 3, 6]));
        assert_eq!(parse_path("1-x"), None);
    }

    #[test]
    fn rejects_garbage() {
        assert!(TraceRecord::parse_line("{", 1).is_err());
        assert!(TraceRecord::parse_line(r#"{"time":1}"#, 1).is_err());
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            any::<f64>()
                .prop_filter("nan never equals itself", |f| !f.is_nan())
                .prop_map(Value::Num),
            "[a-z0-9 -]{0,8}"
                .prop_filter("reserved", |s| s != "inf" && s != "-inf" && s != "nan")
                .prop_map(Value::Str),
            any::<bool>().prop_map(Value::Bool),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(
            micros in 0u64..10_000_000_000u64,
            node in proptest::option::of(0u32..1000),
            event in "[A-Z_]{1,12}",
            values in prop::collection::vec(("[a-z]{1,6}", arb_value()), 0..6),
        ) {
            let mut detail = Detail::new();
            let mut seen = std::collections::BTreeSet::new();
            for (k, v) in values {
                if seen.insert(k.clone()) {
                    detail.push(&k, v);
                }
            }
            let r = TraceRecord::new(micros as f64 / 1e6, node, &event, detail);
            let back = TraceRecord::parse_line(&r.to_json_line(), 1).unwrap();
            prop_assert_eq!(back.time, trace_time(r.time));
            prop_assert_eq!(back.node, r.node);
            prop_assert_eq!(back.event, r.event);
            prop_assert_eq!(back.detail, r.detail);
        }
    }
}
