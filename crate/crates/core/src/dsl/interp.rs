//! Tree-walking interpreter with step, API-call and output budgets.

use std::collections::HashMap;
use std::rc::Rc;

use super::ast::*;
use super::value::{display, range_len, repr, values_equal, Value};
use super::{ErrorKind, ExecError, ExecutionOutcome, Limits};
use crate::api::{ApiContext, ApiError, AttributeValue};

/// Python builtins that exist but are deliberately not provided.
const WITHHELD_BUILTINS: &[&str] = &[
    "open", "eval", "exec", "compile", "__import__", "input", "globals", "locals", "vars", "dir", "getattr",
    "setattr", "delattr", "hasattr", "enumerate", "zip", "map", "reversed", "iter", "next", "dict", "tuple", "any",
    "all", "format", "repr", "chr", "ord", "hash", "id", "type", "isinstance", "callable", "exit", "quit", "help",
    "breakpoint", "memoryview", "bytes", "bytearray", "frozenset", "object", "super", "property",
];

const ALLOC_CHUNK: usize = 16;
const RANGE_BOUND: i64 = 1 << 50;

type Flow<T> = Result<T, ExecError>;

pub fn execute(program: &Program, ctx: &ApiContext, limits: &Limits) -> ExecutionOutcome {
    let mut it = Interp { ctx, limits, env: HashMap::new(), stdout: String::new(), steps: 0, api_calls: 0, line: 1 };
    let error = it.block(&program.body).err();
    ExecutionOutcome { stdout: it.stdout, steps: it.steps, api_calls: it.api_calls, error }
}

struct Interp<'a> {
    ctx: &'a ApiContext,
    limits: &'a Limits,
    env: HashMap<String, Value>,
    stdout: String,
    steps: u64,
    api_calls: u64,
    line: usize,
}

/// Positional/keyword binding result for one builtin call.
struct Bound {
    name: &'static str,
    slots: Vec<Option<Value>>,
    rest: Vec<Value>,
}

impl Bound {
    fn take(&mut self, i: usize) -> Option<Value> {
        self.slots[i].take()
    }
}

impl<'a> Interp<'a> {
    fn fail<T>(&self, kind: ErrorKind, message: impl Into<String>) -> Flow<T> {
        Err(ExecError { kind, message: message.into(), line: self.line })
    }

    fn type_error<T>(&self, message: impl Into<String>) -> Flow<T> {
        self.fail(ErrorKind::TypeError, message)
    }

    /// A charge that does not fit is refused; the budget is then spent.
    fn step(&mut self, n: u64) -> Flow<()> {
        if self.steps.saturating_add(n) > self.limits.max_steps {
            self.steps = self.limits.max_steps;
            return self.fail(
                ErrorKind::StepLimitExceeded,
                format!("program exceeded the limit of {} steps", self.limits.max_steps),
            );
        }
        self.steps += n;
        Ok(())
    }

    /// Charge for materializing `len` elements, before allocating them.
    fn alloc(&mut self, len: usize) -> Flow<()> {
        self.step(len.div_ceil(ALLOC_CHUNK) as u64)
    }

    fn api_call(&mut self) -> Flow<()> {
        self.api_calls += 1;
        if self.api_calls > self.limits.max_api_calls {
            return self.fail(
                ErrorKind::ApiCallLimitExceeded,
                format!("program exceeded the limit of {} scene API calls", self.limits.max_api_calls),
            );
        }
        Ok(())
    }

    fn api<T>(&self, r: Result<T, ApiError>) -> Flow<T> {
        r.or_else(|e| self.fail(ErrorKind::Api(e.kind()), e.to_string()))
    }

    fn emit(&mut self, line: &str) -> Flow<()> {
        let max = self.limits.max_stdout_bytes;
        let room = max.saturating_sub(self.stdout.len());
        if line.len() < room {
            self.stdout.push_str(line);
            self.stdout.push('\n');
            return Ok(());
        }
        let mut cut = room.min(line.len());
        while !line.is_char_boundary(cut) {
            cut -= 1;
        }
        self.stdout.push_str(&line[..cut]);
        self.fail(ErrorKind::OutputTruncated, format!("program output exceeded {max} bytes"))
    }

    // ---- statements ----

    fn block(&mut self, body: &[Stmt]) -> Flow<()> {
        for stmt in body {
            self.stmt(stmt)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Flow<()> {
        self.line = stmt.pos.line;
        self.step(1)?;
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                let v = self.eval(value)?;
                self.env.insert(target.clone(), v);
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::If { cond, then, otherwise } => {
                if self.eval(cond)?.truthy() {
                    self.block(then)?;
                } else {
                    self.block(otherwise)?;
                }
            }
            StmtKind::For { var, iter, body } => {
                let it = self.eval(iter)?;
                let line = self.line;
                self.for_each(&it, |me, item| {
                    me.env.insert(var.clone(), item);
                    me.block(body)?;
                    me.line = line;
                    Ok(())
                })?;
            }
        }
        Ok(())
    }

    fn for_each(&mut self, it: &Value, mut f: impl FnMut(&mut Self, Value) -> Flow<()>) -> Flow<()> {
        match it {
            Value::List(items) | Value::Set(items) => {
                let items = Rc::clone(items);
                for item in items.iter() {
                    f(self, item.clone())?;
                }
            }
            Value::Str(s) => {
                let s = Rc::clone(s);
                for c in s.chars() {
                    f(self, Value::str(c.to_string()))?;
                }
            }
            Value::Range { start, step, .. } => {
                let n = range_len(it);
                for k in 0..n {
                    // ranges are lazy, so each iteration pays its own step
                    self.step(1)?;
                    f(self, Value::Num((start + k * step) as f64))?;
                }
            }
            other => return self.type_error(format!("'{}' object is not iterable", other.type_name())),
        }
        Ok(())
    }

    fn collect(&mut self, it: &Value) -> Flow<Vec<Value>> {
        match it {
            Value::List(items) | Value::Set(items) => Ok(items.to_vec()),
            Value::Range { .. } => {
                let n = range_len(it);
                self.alloc(n as usize)?;
                let mut out = Vec::with_capacity(n as usize);
                self.for_each(it, |_, v| {
                    out.push(v);
                    Ok(())
                })?;
                Ok(out)
            }
            _ => {
                let mut out = Vec::new();
                self.for_each(it, |_, v| {
                    out.push(v);
                    Ok(())
                })?;
                Ok(out)
            }
        }
    }

    // ---- expressions ----

    fn eval(&mut self, e: &Expr) -> Flow<Value> {
        self.step(1)?;
        match e {
            Expr::None => Ok(Value::None),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Number(n) => Ok(Value::Num(*n)),
            Expr::Str(s) => Ok(Value::str(s.as_str())),
            Expr::FString(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        FStringPart::Text(t) => out.push_str(t),
                        FStringPart::Expr { expr, precision } => {
                            let v = self.eval(expr)?;
                            match precision {
                                None => out.push_str(&display(&v, self.ctx)),
                                Some(p) => match v.as_num() {
                                    Some(n) => out.push_str(&format!("{n:.p$}", p = *p)),
                                    None => {
                                        return self.type_error(format!(
                                            "format ':.{p}f' needs a number, got {}",
                                            v.type_name()
                                        ))
                                    }
                                },
                            }
                        }
                    }
                }
                self.alloc(out.len())?;
                Ok(Value::str(out))
            }
            Expr::Name(n) => match self.env.get(n) {
                Some(v) => Ok(v.clone()),
                None => self.fail(ErrorKind::NameError, format!("name '{n}' is not defined")),
            },
            Expr::List(items) => {
                self.alloc(items.len())?;
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(self.eval(i)?);
                }
                Ok(Value::list(out))
            }
            Expr::ListComp { elem, var, iter, cond } => {
                let it = self.eval(iter)?;
                let saved = self.env.remove(var);
                let mut out = Vec::new();
                let r = self.for_each(&it, |me, item| {
                    me.env.insert(var.clone(), item);
                    if let Some(c) = cond {
                        if !me.eval(c)?.truthy() {
                            return Ok(());
                        }
                    }
                    let v = me.eval(elem)?;
                    out.push(v);
                    if out.len() % ALLOC_CHUNK == 0 {
                        me.step(1)?;
                    }
                    Ok(())
                });
                match saved {
                    Some(v) => self.env.insert(var.clone(), v),
                    None => self.env.remove(var),
                };
                r?;
                Ok(Value::list(out))
            }
            Expr::Member { object, field } => {
                let v = self.eval(object)?;
                let Value::Obj(i) = v else {
                    return self.type_error(format!(
                        "'{}' has no attribute '{}'; only objects have .category and .xyz",
                        v.type_name(),
                        field.name()
                    ));
                };
                let o = self.ctx.object(i);
                Ok(match field {
                    Field::Category => Value::str(o.category.as_str()),
                    Field::Xyz => Value::list(o.centroid.iter().map(|c| Value::Num(*c)).collect()),
                })
            }
            Expr::Index { object, index } => {
                let obj = self.eval(object)?;
                let idx = self.eval(index)?;
                self.index(&obj, &idx)
            }
            Expr::Slice { object, start, stop } => {
                let obj = self.eval(object)?;
                let start = match start {
                    Some(s) => Some(self.eval(s)?),
                    None => None,
                };
                let stop = match stop {
                    Some(s) => Some(self.eval(s)?),
                    None => None,
                };
                self.slice(&obj, start.as_ref(), stop.as_ref())
            }
            Expr::Call { func, args } => {
                let mut positional = Vec::new();
                let mut keywords = Vec::new();
                for a in args {
                    let v = self.eval(&a.value)?;
                    match &a.name {
                        Some(n) => keywords.push((n.as_str(), v)),
                        None => positional.push(v),
                    }
                }
                self.call(func, positional, keywords)
            }
            Expr::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match op {
                    UnaryOp::Not => Ok(Value::Bool(!v.truthy())),
                    UnaryOp::Neg => match v.as_num() {
                        Some(n) => Ok(Value::Num(-n)),
                        None => self.type_error(format!("bad operand type for unary -: '{}'", v.type_name())),
                    },
                }
            }
            Expr::Binary { op: BinOp::And, lhs, rhs } => {
                let l = self.eval(lhs)?;
                if !l.truthy() {
                    return Ok(l);
                }
                self.eval(rhs)
            }
            Expr::Binary { op: BinOp::Or, lhs, rhs } => {
                let l = self.eval(lhs)?;
                if l.truthy() {
                    return Ok(l);
                }
                self.eval(rhs)
            }
            Expr::Binary { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                self.binary(*op, &l, &r)
            }
        }
    }

    fn int_index(&self, v: &Value, what: &str) -> Flow<i64> {
        match v.as_num() {
            Some(n) if n.fract() == 0.0 && n.is_finite() => Ok(n as i64),
            _ => self.type_error(format!("{what} must be an integer, not {}", v.type_name())),
        }
    }

    fn index(&mut self, obj: &Value, idx: &Value) -> Flow<Value> {
        let len = match obj {
            Value::List(items) => items.len() as i64,
            Value::Str(s) => s.chars().count() as i64,
            Value::Range { .. } => range_len(obj),
            Value::Set(_) => {
                return self.type_error("'set' object is not subscriptable; convert it with list(...) or sort_by_distance(...)")
            }
            other => return self.type_error(format!("'{}' object is not subscriptable", other.type_name())),
        };
        let i = self.int_index(idx, "index")?;
        let k = if i < 0 { i + len } else { i };
        if k < 0 || k >= len {
            return self.fail(ErrorKind::IndexError, format!("index {i} out of range for length {len}"));
        }
        Ok(match obj {
            Value::List(items) => items[k as usize].clone(),
            Value::Str(s) => Value::str(s.chars().nth(k as usize).unwrap().to_string()),
            Value::Range { start, step, .. } => Value::Num((start + k * step) as f64),
            _ => unreachable!(),
        })
    }

    fn slice(&mut self, obj: &Value, start: Option<&Value>, stop: Option<&Value>) -> Flow<Value> {
        let len = match obj {
            Value::List(items) => items.len() as i64,
            Value::Str(s) => s.chars().count() as i64,
            Value::Set(_) => {
                return self.type_error("'set' object is not subscriptable; convert it with list(...) or sort_by_distance(...)")
            }
            other => return self.type_error(format!("'{}' object cannot be sliced", other.type_name())),
        };
        let bound = |me: &Self, v: Option<&Value>, default: i64| -> Flow<i64> {
            match v {
                None | Some(Value::None) => Ok(default),
                Some(v) => {
                    let i = me.int_index(v, "slice index")?;
                    Ok(if i < 0 { (i + len).max(0) } else { i.min(len) })
                }
            }
        };
        let a = bound(self, start, 0)? as usize;
        let b = (bound(self, stop, len)? as usize).max(a);
        self.alloc(b - a)?;
        Ok(match obj {
            Value::List(items) => Value::list(items[a..b].to_vec()),
            Value::Str(s) => Value::str(s.chars().skip(a).take(b - a).collect::<String>()),
            _ => unreachable!(),
        })
    }

    fn contains(&self, container: &Value, item: &Value) -> Flow<bool> {
        match container {
            Value::List(items) | Value::Set(items) => Ok(items.iter().any(|x| values_equal(x, item))),
            Value::Str(s) => match item {
                Value::Str(sub) => Ok(s.contains(&**sub)),
                other => self.type_error(format!("'in <str>' requires a string, not {}", other.type_name())),
            },
            Value::Range { start, step, .. } => Ok(match item.as_num() {
                Some(n) if n.fract() == 0.0 => {
                    let n = n as i64;
                    let off = n - start;
                    off % step == 0 && (0..range_len(container)).contains(&(off / step))
                }
                _ => false,
            }),
            other => self.type_error(format!("argument of type '{}' is not a container", other.type_name())),
        }
    }

    fn compare(&self, op: BinOp, l: &Value, r: &Value) -> Flow<bool> {
        let ord = match (l, r) {
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::List(a), Value::List(b)) => {
                let mut ord = a.len().cmp(&b.len());
                for (x, y) in a.iter().zip(b.iter()) {
                    if !values_equal(x, y) {
                        let lt = self.compare(BinOp::Lt, x, y)?;
                        ord = if lt { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater };
                        break;
                    }
                }
                ord
            }
            _ => match (l.as_num(), r.as_num()) {
                (Some(a), Some(b)) => match a.partial_cmp(&b) {
                    Some(o) => o,
                    None => return Ok(false),
                },
                _ => {
                    return self.type_error(format!(
                        "'{}' not supported between '{}' and '{}'",
                        op.symbol(),
                        l.type_name(),
                        r.type_name()
                    ))
                }
            },
        };
        Ok(match op {
            BinOp::Lt => ord.is_lt(),
            BinOp::Le => ord.is_le(),
            BinOp::Gt => ord.is_gt(),
            _ => ord.is_ge(),
        })
    }

    fn repeat(&mut self, v: &Value, times: &Value) -> Flow<Value> {
        let n = self.int_index(times, "repeat count")?.max(0) as usize;
        match v {
            Value::Str(s) => {
                self.alloc(s.len().saturating_mul(n))?;
                Ok(Value::str(s.repeat(n)))
            }
            Value::List(items) => {
                self.alloc(items.len().saturating_mul(n))?;
                let mut out = Vec::with_capacity(items.len() * n);
                for _ in 0..n {
                    out.extend(items.iter().cloned());
                }
                Ok(Value::list(out))
            }
            _ => unreachable!(),
        }
    }

    fn binary(&mut self, op: BinOp, l: &Value, r: &Value) -> Flow<Value> {
        let unsupported = |me: &Self| -> Flow<Value> {
            let hint = match (op, l, r) {
                (BinOp::BitOr | BinOp::BitAnd, Value::List(_), _) | (BinOp::BitOr | BinOp::BitAnd, _, Value::List(_)) => {
                    "; convert lists with set(...) first"
                }
                _ => "",
            };
            me.type_error(format!(
                "unsupported operand types for {}: '{}' and '{}'{hint}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ))
        };
        match op {
            BinOp::Eq => return Ok(Value::Bool(values_equal(l, r))),
            BinOp::Ne => return Ok(Value::Bool(!values_equal(l, r))),
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => return Ok(Value::Bool(self.compare(op, l, r)?)),
            BinOp::In => return Ok(Value::Bool(self.contains(r, l)?)),
            BinOp::NotIn => return Ok(Value::Bool(!self.contains(r, l)?)),
            _ => {}
        }
        match (op, l, r) {
            (BinOp::Add, Value::Str(a), Value::Str(b)) => {
                self.alloc(a.len() + b.len())?;
                return Ok(Value::str(format!("{a}{b}")));
            }
            (BinOp::Add, Value::List(a), Value::List(b)) => {
                self.alloc(a.len() + b.len())?;
                let mut out = a.to_vec();
                out.extend(b.iter().cloned());
                return Ok(Value::list(out));
            }
            (BinOp::Mul, Value::Str(_) | Value::List(_), n) if n.as_num().is_some() => return self.repeat(l, n),
            (BinOp::Mul, n, Value::Str(_) | Value::List(_)) if n.as_num().is_some() => return self.repeat(r, n),
            (BinOp::BitOr | BinOp::BitAnd | BinOp::Sub, Value::Set(a), Value::Set(b)) => {
                self.alloc(a.len() + b.len())?;
                let items: Vec<Value> = match op {
                    BinOp::BitOr => a.iter().chain(b.iter()).cloned().collect(),
                    BinOp::BitAnd => a.iter().filter(|x| b.iter().any(|y| values_equal(x, y))).cloned().collect(),
                    _ => a.iter().filter(|x| !b.iter().any(|y| values_equal(x, y))).cloned().collect(),
                };
                return Ok(Value::set_from(items));
            }
            _ => {}
        }
        let (Some(a), Some(b)) = (l.as_num(), r.as_num()) else {
            return unsupported(self);
        };
        let zero = |me: &Self| me.fail(ErrorKind::ZeroDivisionError, "division by zero");
        let v = match op {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div if b == 0.0 => return zero(self),
            BinOp::Div => a / b,
            BinOp::FloorDiv if b == 0.0 => return zero(self),
            BinOp::FloorDiv => (a / b).floor(),
            BinOp::Mod if b == 0.0 => return zero(self),
            BinOp::Mod => a - b * (a / b).floor(),
            BinOp::Pow => {
                if a == 0.0 && b < 0.0 {
                    return zero(self);
                }
                a.powf(b)
            }
            BinOp::BitOr | BinOp::BitAnd => return unsupported(self),
            _ => unreachable!(),
        };
        Ok(Value::Num(v))
    }

    // ---- builtins ----

    fn bind(
        &self,
        name: &'static str,
        params: &[&str],
        required: usize,
        variadic: bool,
        positional: Vec<Value>,
        keywords: Vec<(&str, Value)>,
    ) -> Flow<Bound> {
        let mut slots: Vec<Option<Value>> = vec![None; params.len()];
        let mut rest = Vec::new();
        for (i, v) in positional.into_iter().enumerate() {
            if variadic {
                rest.push(v);
            } else if i < params.len() {
                slots[i] = Some(v);
            } else {
                return self.fail(
                    ErrorKind::ArityError,
                    format!("{name}() takes at most {} arguments", params.len()),
                );
            }
        }
        for (k, v) in keywords {
            match params.iter().position(|p| *p == k) {
                Some(i) if slots[i].is_none() => slots[i] = Some(v),
                Some(_) => return self.fail(ErrorKind::ArityError, format!("{name}() got multiple values for '{k}'")),
                None => {
                    return self.fail(
                        ErrorKind::ArityError,
                        format!("{name}() got an unexpected keyword argument '{k}'; parameters are: {}", params.join(", ")),
                    )
                }
            }
        }
        if !variadic {
            if let Some(missing) = (0..required).find(|&i| slots[i].is_none()) {
                return self.fail(
                    ErrorKind::ArityError,
                    format!("{name}() missing required argument '{}'", params[missing]),
                );
            }
        }
        Ok(Bound { name, slots, rest })
    }

    fn want_str(&self, fname: &str, v: Option<Value>, param: &str) -> Flow<Rc<str>> {
        match v {
            Some(Value::Str(s)) => Ok(s),
            Some(other) => self.type_error(format!("{}(): '{param}' must be a string, got {}", fname, other.type_name())),
            None => self.fail(ErrorKind::ArityError, format!("{}() missing required argument '{param}'", fname)),
        }
    }

    fn want_obj(&self, fname: &str, v: Option<Value>, param: &str) -> Flow<usize> {
        match v {
            Some(Value::Obj(i)) => Ok(i),
            Some(Value::Set(_) | Value::List(_)) => self.type_error(format!(
                "{}(): '{param}' must be a single object, got a collection; iterate over it or pick one element",
                fname
            )),
            Some(other) => self.type_error(format!("{}(): '{param}' must be an object, got {}", fname, other.type_name())),
            None => self.fail(ErrorKind::ArityError, format!("{}() missing required argument '{param}'", fname)),
        }
    }

    fn want_objects(&self, fname: &str, v: Option<Value>, param: &str) -> Flow<Vec<usize>> {
        let items = match v {
            Some(Value::Set(items) | Value::List(items)) => items,
            Some(Value::Obj(i)) => return Ok(vec![i]),
            Some(other) => {
                return self.type_error(format!("{}(): '{param}' must be a set of objects, got {}", fname, other.type_name()))
            }
            None => return self.fail(ErrorKind::ArityError, format!("{}() missing required argument '{param}'", fname)),
        };
        let mut out = Vec::with_capacity(items.len());
        for it in items.iter() {
            match it {
                Value::Obj(i) => out.push(*i),
                other => {
                    return self.type_error(format!(
                        "{}(): '{param}' must contain only objects, found {}",
                        fname,
                        other.type_name()
                    ))
                }
            }
        }
        Ok(out)
    }

    fn want_strings(&self, fname: &str, v: Option<Value>, param: &str) -> Flow<Option<Vec<String>>> {
        match v {
            None | Some(Value::None) => Ok(None),
            Some(Value::List(items) | Value::Set(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items.iter() {
                    match it {
                        Value::Str(s) => out.push(s.to_string()),
                        other => {
                            return self.type_error(format!(
                                "{}(): '{param}' must be a list of strings, found {}",
                                fname,
                                other.type_name()
                            ))
                        }
                    }
                }
                Ok(Some(out))
            }
            Some(Value::Str(s)) => Ok(Some(vec![s.to_string()])),
            Some(other) => self.type_error(format!("{}(): '{param}' must be a list of strings, got {}", fname, other.type_name())),
        }
    }

    fn object_set(&mut self, mut idx: Vec<usize>) -> Flow<Value> {
        self.alloc(idx.len())?;
        idx.sort_unstable();
        idx.dedup();
        Ok(Value::Set(Rc::new(idx.into_iter().map(Value::Obj).collect())))
    }

    fn strings(&mut self, items: Vec<String>) -> Flow<Value> {
        self.alloc(items.len())?;
        Ok(Value::list(items.into_iter().map(Value::str).collect()))
    }

    fn call(&mut self, func: &str, positional: Vec<Value>, keywords: Vec<(&str, Value)>) -> Flow<Value> {
        let ctx = self.ctx;
        match func {
            "scene" => {
                self.bind("scene", &[], 0, false, positional, keywords)?;
                self.api_call()?;
                self.object_set(ctx.scene_objects())
            }
            "filter" => {
                let mut b = self.bind("filter", &["object_set", "category"], 2, false, positional, keywords)?;
                let objs = self.want_objects(b.name, b.take(0), "object_set")?;
                let cat = self.want_str(b.name, b.take(1), "category")?;
                self.api_call()?;
                self.object_set(ctx.filter(&objs, &cat))
            }
            "relate" => {
                let mut b = self.bind("relate", &["object_set", "reference_object", "relation"], 3, false, positional, keywords)?;
                let objs = self.want_objects(b.name, b.take(0), "object_set")?;
                let reference = self.want_obj(b.name, b.take(1), "reference_object")?;
                let rel = self.want_str(b.name, b.take(2), "relation")?;
                self.api_call()?;
                let r = self.api(ctx.relate(&objs, reference, &rel))?;
                self.object_set(r)
            }
            "relate_agent" => {
                let mut b = self.bind("relate_agent", &["object_set", "relation"], 2, false, positional, keywords)?;
                let objs = self.want_objects(b.name, b.take(0), "object_set")?;
                let rel = self.want_str(b.name, b.take(1), "relation")?;
                self.api_call()?;
                let r = self.api(ctx.relate_agent(&objs, &rel))?;
                self.object_set(r)
            }
            "query_relation" => {
                let mut b = self.bind(
                    "query_relation",
                    &["object", "reference_object", "candidate_relations"],
                    2,
                    false,
                    positional,
                    keywords,
                )?;
                let obj = self.want_obj(b.name, b.take(0), "object")?;
                let reference = self.want_obj(b.name, b.take(1), "reference_object")?;
                let cands = self.want_strings(b.name, b.take(2), "candidate_relations")?;
                self.api_call()?;
                let r = self.api(ctx.query_relation(obj, reference, cands.as_deref()))?;
                self.strings(r)
            }
            "query_relation_agent" => {
                let mut b =
                    self.bind("query_relation_agent", &["object", "candidate_relations"], 1, false, positional, keywords)?;
                let obj = self.want_obj(b.name, b.take(0), "object")?;
                let cands = self.want_strings(b.name, b.take(1), "candidate_relations")?;
                self.api_call()?;
                let r = self.api(ctx.query_relation_agent(obj, cands.as_deref()))?;
                self.strings(r)
            }
            "query_attribute" => {
                let mut b = self.bind(
                    "query_attribute",
                    &["object", "attribute_type", "candidate_attribute_values"],
                    2,
                    false,
                    positional,
                    keywords,
                )?;
                let obj = self.want_obj(b.name, b.take(0), "object")?;
                let kind = self.want_str(b.name, b.take(1), "attribute_type")?;
                let cands = self.want_strings(b.name, b.take(2), "candidate_attribute_values")?;
                self.api_call()?;
                Ok(match self.api(ctx.query_attribute(obj, &kind, cands.as_deref()))? {
                    AttributeValue::Lwh(v) => Value::list(v.iter().map(|x| Value::Num(*x)).collect()),
                    AttributeValue::Number(n) => Value::Num(n),
                    AttributeValue::Text(t) => Value::str(t),
                })
            }
            "query_state" => {
                let mut b = self.bind("query_state", &["object", "candidate_states"], 2, false, positional, keywords)?;
                let obj = self.want_obj(b.name, b.take(0), "object")?;
                let cands = self.want_strings(b.name, b.take(1), "candidate_states")?.unwrap_or_default();
                self.api_call()?;
                Ok(Value::str(self.api(ctx.query_state(obj, &cands))?))
            }
            "sort_by_distance" => {
                let mut b = self.bind("sort_by_distance", &["objects"], 1, false, positional, keywords)?;
                let objs = self.want_objects(b.name, b.take(0), "objects")?;
                self.alloc(objs.len())?;
                Ok(Value::list(ctx.sort_by_distance(&objs).into_iter().map(Value::Obj).collect()))
            }
            "print" => {
                let mut b = self.bind("print", &["sep"], 0, true, positional, keywords)?;
                let sep = match b.take(0) {
                    None => " ".into(),
                    Some(v) => self.want_str(b.name, Some(v), "sep")?.to_string(),
                };
                let parts: Vec<String> = b.rest.iter().map(|v| display(v, ctx)).collect();
                let line = parts.join(&sep);
                self.alloc(line.len())?;
                self.emit(&line)?;
                Ok(Value::None)
            }
            "len" => {
                let mut b = self.bind("len", &["obj"], 1, false, positional, keywords)?;
                match b.take(0).unwrap() {
                    Value::List(v) | Value::Set(v) => Ok(Value::Num(v.len() as f64)),
                    Value::Str(s) => Ok(Value::Num(s.chars().count() as f64)),
                    r @ Value::Range { .. } => Ok(Value::Num(range_len(&r) as f64)),
                    other => self.type_error(format!("object of type '{}' has no len()", other.type_name())),
                }
            }
            "str" => {
                let mut b = self.bind("str", &["object"], 0, false, positional, keywords)?;
                let s = b.take(0).map(|v| display(&v, ctx)).unwrap_or_default();
                self.alloc(s.len())?;
                Ok(Value::str(s))
            }
            "bool" => {
                let mut b = self.bind("bool", &["x"], 0, false, positional, keywords)?;
                Ok(Value::Bool(b.take(0).is_some_and(|v| v.truthy())))
            }
            "int" | "float" => {
                let name = if func == "int" { "int" } else { "float" };
                let mut b = self.bind(name, &["x"], 0, false, positional, keywords)?;
                let v = b.take(0).unwrap_or(Value::Num(0.0));
                let n = match &v {
                    Value::Str(s) => match s.trim().parse::<f64>() {
                        Ok(n) if name == "float" || n.fract() == 0.0 => n,
                        _ => return self.fail(ErrorKind::ValueError, format!("invalid literal for {name}(): {}", repr(&v, ctx))),
                    },
                    other => match other.as_num() {
                        Some(n) => n,
                        None => return self.type_error(format!("{name}() argument must be a string or a number, not {}", other.type_name())),
                    },
                };
                if name == "int" && !n.is_finite() {
                    return self.fail(ErrorKind::ValueError, format!("cannot convert {} to integer", repr(&v, ctx)));
                }
                Ok(Value::Num(if name == "int" { n.trunc() } else { n }))
            }
            "abs" => {
                let mut b = self.bind("abs", &["x"], 1, false, positional, keywords)?;
                let v = b.take(0).unwrap();
                match v.as_num() {
                    Some(n) => Ok(Value::Num(n.abs())),
                    None => self.type_error(format!("bad operand type for abs(): '{}'", v.type_name())),
                }
            }
            "round" => {
                let mut b = self.bind("round", &["number", "ndigits"], 1, false, positional, keywords)?;
                let v = b.take(0).unwrap();
                let Some(n) = v.as_num() else {
                    return self.type_error(format!("type {} doesn't define round()", v.type_name()));
                };
                let digits = match b.take(1) {
                    None | Some(Value::None) => 0,
                    Some(d) => self.int_index(&d, "ndigits")?.clamp(-308, 308),
                };
                let r = if !n.is_finite() {
                    n
                } else if digits > 0 {
                    // decimal rounding of the exact binary value, as Python does
                    format!("{n:.p$}", p = digits as usize).parse().unwrap_or(n)
                } else {
                    let scale = 10f64.powi(-digits as i32);
                    (n / scale).round_ties_even() * scale
                };
                Ok(Value::Num(r))
            }
            "min" | "max" => {
                let name = if func == "min" { "min" } else { "max" };
                let b = self.bind(name, &[], 0, true, positional, keywords)?;
                let items = match b.rest.len() {
                    0 => return self.fail(ErrorKind::ArityError, format!("{name}() expected at least 1 argument")),
                    1 => self.collect(&b.rest[0])?,
                    _ => b.rest.clone(),
                };
                let mut best: Option<Value> = None;
                for it in items {
                    best = Some(match best {
                        None => it,
                        Some(cur) => {
                            let better = self.compare(if name == "min" { BinOp::Lt } else { BinOp::Gt }, &it, &cur)?;
                            if better {
                                it
                            } else {
                                cur
                            }
                        }
                    });
                }
                match best {
                    Some(v) => Ok(v),
                    None => self.fail(ErrorKind::ValueError, format!("{name}() arg is an empty sequence")),
                }
            }
            "sum" => {
                let mut b = self.bind("sum", &["iterable", "start"], 1, false, positional, keywords)?;
                let items = self.collect(&b.take(0).unwrap())?;
                let mut acc = b.take(1).unwrap_or(Value::Num(0.0));
                for it in items {
                    acc = self.binary(BinOp::Add, &acc, &it)?;
                }
                Ok(acc)
            }
            "list" => {
                let mut b = self.bind("list", &["iterable"], 0, false, positional, keywords)?;
                match b.take(0) {
                    None => Ok(Value::list(Vec::new())),
                    Some(v) => {
                        let items = self.collect(&v)?;
                        self.alloc(items.len())?;
                        Ok(Value::list(items))
                    }
                }
            }
            "set" => {
                let mut b = self.bind("set", &["iterable"], 0, false, positional, keywords)?;
                let items = match b.take(0) {
                    None => Vec::new(),
                    Some(v) => self.collect(&v)?,
                };
                if let Some(bad) = items.iter().find(|v| !v.is_hashable()) {
                    return self.type_error(format!("unhashable type: '{}'", bad.type_name()));
                }
                self.alloc(items.len())?;
                Ok(Value::set_from(items))
            }
            "sorted" => {
                let mut b = self.bind("sorted", &["iterable", "reverse"], 1, false, positional, keywords)?;
                let mut items = self.collect(&b.take(0).unwrap())?;
                let reverse = b.take(1).is_some_and(|v| v.truthy());
                self.alloc(items.len())?;
                // insertion sort keeps comparison errors reportable and the sort stable
                for i in 1..items.len() {
                    let mut j = i;
                    while j > 0 && self.compare(BinOp::Lt, &items[j], &items[j - 1])? {
                        items.swap(j, j - 1);
                        j -= 1;
                    }
                    self.step(1)?;
                }
                if reverse {
                    items.reverse();
                }
                Ok(Value::list(items))
            }
            "range" => {
                let b = self.bind("range", &[], 0, true, positional, keywords)?;
                let mut ints = Vec::with_capacity(3);
                for v in &b.rest {
                    let n = self.int_index(v, "range() argument")?;
                    if n.abs() > RANGE_BOUND {
                        return self.fail(ErrorKind::ValueError, format!("range() argument {n} is too large"));
                    }
                    ints.push(n);
                }
                let (start, stop, step) = match ints.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    _ => return self.fail(ErrorKind::ArityError, "range() takes 1 to 3 arguments"),
                };
                if step == 0 {
                    return self.fail(ErrorKind::ValueError, "range() step must not be zero");
                }
                Ok(Value::Range { start, stop, step })
            }
            "join" => {
                let mut b = self.bind("join", &["items", "sep"], 1, false, positional, keywords)?;
                let items = self.collect(&b.take(0).unwrap())?;
                let sep = match b.take(1) {
                    None => " ".into(),
                    Some(v) => self.want_str(b.name, Some(v), "sep")?.to_string(),
                };
                let s = items.iter().map(|v| display(v, ctx)).collect::<Vec<_>>().join(&sep);
                self.alloc(s.len())?;
                Ok(Value::str(s))
            }
            other if WITHHELD_BUILTINS.contains(&other) => self.fail(
                ErrorKind::UnknownBuiltin,
                format!("'{other}' is not available; see the API documentation for the supported functions"),
            ),
            other if self.env.contains_key(other) => {
                self.type_error(format!("'{other}' is a variable, not a function"))
            }
            other => self.fail(ErrorKind::NameError, format!("name '{other}' is not defined")),
        }
    }
}

/// Every callable name.
pub const BUILTINS: &[&str] = &[
    "scene",
    "filter",
    "relate",
    "relate_agent",
    "query_relation",
    "query_relation_agent",
    "query_attribute",
    "query_state",
    "sort_by_distance",
    "print",
    "len",
    "str",
    "bool",
    "int",
    "float",
    "abs",
    "round",
    "min",
    "max",
    "sum",
    "list",
    "set",
    "sorted",
    "range",
    "join",
];
