//! Runtime values and their printed forms.

use std::cmp::Ordering;
use std::rc::Rc;

use crate::api::ApiContext;

#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Num(f64),
    Str(Rc<str>),
    List(Rc<Vec<Value>>),
    /// Sorted, deduplicated; objects order by bundle index.
    Set(Rc<Vec<Value>>),
    Obj(usize),
    Range { start: i64, stop: i64, step: i64 },
}

impl Value {
    pub fn str(s: impl Into<Rc<str>>) -> Value {
        Value::Str(s.into())
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(items))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Num(_) => "number",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Set(_) => "set",
            Value::Obj(_) => "ObjectAttribute",
            Value::Range { .. } => "range",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(v) | Value::Set(v) => !v.is_empty(),
            Value::Obj(_) => true,
            Value::Range { .. } => range_len(self) > 0,
        }
    }

    /// Numeric view; booleans count as 0/1.
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn is_hashable(&self) -> bool {
        matches!(self, Value::None | Value::Bool(_) | Value::Num(_) | Value::Str(_) | Value::Obj(_))
    }

    /// Build a canonical set; the caller checks hashability.
    pub fn set_from(mut items: Vec<Value>) -> Value {
        items.sort_by(set_order);
        items.dedup_by(|a, b| set_order(a, b) == Ordering::Equal);
        Value::Set(Rc::new(items))
    }
}

pub fn range_len(v: &Value) -> i64 {
    match *v {
        Value::Range { start, stop, step } => {
            if step > 0 && stop > start {
                (stop - start + step - 1) / step
            } else if step < 0 && start > stop {
                (start - stop - step - 1) / -step
            } else {
                0
            }
        }
        _ => 0,
    }
}

fn set_rank(v: &Value) -> u8 {
    match v {
        Value::None => 0,
        Value::Bool(_) | Value::Num(_) => 1,
        Value::Str(_) => 2,
        Value::Obj(_) => 3,
        _ => 4,
    }
}

/// Total order used for set canonicalization.
pub fn set_order(a: &Value, b: &Value) -> Ordering {
    set_rank(a).cmp(&set_rank(b)).then_with(|| match (a, b) {
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Obj(x), Value::Obj(y)) => x.cmp(y),
        _ => match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            _ => Ordering::Equal,
        },
    })
}

pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::None, Value::None) => true,
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Obj(x), Value::Obj(y)) => x == y,
        (Value::List(x), Value::List(y)) | (Value::Set(x), Value::Set(y)) => {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| values_equal(p, q))
        }
        (Value::Range { .. }, Value::Range { .. }) => {
            let (la, lb) = (range_len(a), range_len(b));
            la == lb && (la == 0 || range_items(a, 2) == range_items(b, 2))
        }
        _ => match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

fn range_items(v: &Value, n: i64) -> Vec<i64> {
    match *v {
        Value::Range { start, step, .. } => (0..n.min(range_len(v))).map(|k| start + k * step).collect(),
        _ => Vec::new(),
    }
}

/// Python-style number text: integral values without a fraction, shortest
/// round-trip digits otherwise, exponent form outside [1e-4, 1e16).
pub fn format_num(n: f64) -> String {
    if n.is_nan() {
        return "nan".into();
    }
    if n.is_infinite() {
        return if n > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = n.abs();
    if n.fract() == 0.0 && a < 1e16 {
        return format!("{}", n as i64);
    }
    if !(1e-4..1e16).contains(&a) {
        let s = format!("{n:e}");
        let (mantissa, exp) = s.split_once('e').unwrap();
        let exp: i32 = exp.parse().unwrap();
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    format!("{n}")
}

pub fn repr_str(s: &str) -> String {
    let q = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(q);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == q => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(q);
    out
}

/// `str(v)`.
pub fn display(v: &Value, ctx: &ApiContext) -> String {
    match v {
        Value::Str(s) => s.to_string(),
        _ => repr(v, ctx),
    }
}

/// `repr(v)`: strings quoted, containers bracketed.
pub fn repr(v: &Value, ctx: &ApiContext) -> String {
    match v {
        Value::None => "None".into(),
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Num(n) => format_num(*n),
        Value::Str(s) => repr_str(s),
        Value::List(items) => {
            format!("[{}]", items.iter().map(|i| repr(i, ctx)).collect::<Vec<_>>().join(", "))
        }
        Value::Set(items) if items.is_empty() => "set()".into(),
        Value::Set(items) => {
            format!("{{{}}}", items.iter().map(|i| repr(i, ctx)).collect::<Vec<_>>().join(", "))
        }
        Value::Obj(i) => {
            let o = ctx.object(*i);
            format!("ObjectAttribute(category={}, id={})", repr_str(&o.category), repr_str(&o.id))
        }
        Value::Range { start, stop, step } => {
            if *step == 1 {
                format!("range({start}, {stop})")
            } else {
                format!("range({start}, {stop}, {step})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_text() {
        assert_eq!(format_num(3.0), "3");
        assert_eq!(format_num(-0.5), "-0.5");
        assert_eq!(format_num(2.3456789), "2.3456789");
        assert_eq!(format_num(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(format_num(1e-5), "1e-05");
        assert_eq!(format_num(1.5e20), "1.5e+20");
        assert_eq!(format_num(f64::INFINITY), "inf");
    }

    #[test]
    fn string_repr() {
        assert_eq!(repr_str("coffee table"), "'coffee table'");
        assert_eq!(repr_str("it's"), "\"it's\"");
        assert_eq!(repr_str("a'b\"c"), "'a\\'b\"c'");
    }

    #[test]
    fn sets_are_canonical() {
        let s = Value::set_from(vec![Value::Obj(3), Value::Obj(1), Value::Obj(3), Value::Num(2.0), Value::Bool(true)]);
        let Value::Set(items) = s else { panic!() };
        assert_eq!(items.len(), 4);
        assert!(matches!(items[0], Value::Bool(true)));
        assert!(matches!(items[2], Value::Obj(1)));
    }

    #[test]
    fn range_lengths() {
        assert_eq!(range_len(&Value::Range { start: 0, stop: 5, step: 1 }), 5);
        assert_eq!(range_len(&Value::Range { start: 0, stop: 5, step: 2 }), 3);
        assert_eq!(range_len(&Value::Range { start: 5, stop: 0, step: -2 }), 3);
        assert_eq!(range_len(&Value::Range { start: 5, stop: 0, step: 1 }), 0);
    }
}
