//! Canonical source rendering. `parse(unparse(ast)) == ast` for any tree the
//! parser can produce.

use super::ast::*;

pub fn unparse(program: &Program) -> String {
    let mut out = String::new();
    block(&mut out, &program.body, 0);
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn block(out: &mut String, body: &[Stmt], level: usize) {
    for stmt in body {
        statement(out, stmt, level);
    }
}

fn statement(out: &mut String, stmt: &Stmt, level: usize) {
    indent(out, level);
    match &stmt.kind {
        StmtKind::Assign { target, value } => {
            out.push_str(target);
            out.push_str(" = ");
            out.push_str(&expr(value));
            out.push('\n');
        }
        StmtKind::Expr(e) => {
            out.push_str(&expr(e));
            out.push('\n');
        }
        StmtKind::For { var, iter, body } => {
            out.push_str(&format!("for {var} in {}:\n", expr(iter)));
            block(out, body, level + 1);
        }
        StmtKind::If { cond, then, otherwise } => {
            out.push_str(&format!("if {}:\n", expr(cond)));
            block(out, then, level + 1);
            if_tail(out, otherwise, level);
        }
    }
}

fn if_tail(out: &mut String, otherwise: &[Stmt], level: usize) {
    match otherwise {
        [] => {}
        [Stmt { kind: StmtKind::If { cond, then, otherwise }, .. }] => {
            indent(out, level);
            out.push_str(&format!("elif {}:\n", expr(cond)));
            block(out, then, level + 1);
            if_tail(out, otherwise, level);
        }
        _ => {
            indent(out, level);
            out.push_str("else:\n");
            block(out, otherwise, level + 1);
        }
    }
}

pub fn format_number(n: f64) -> String {
    if n.is_finite() && n.fract() == 0.0 && n.abs() < 1e16 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

fn escape_into(out: &mut String, s: &str, in_fstring: bool) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            '{' if in_fstring => out.push_str("{{"),
            '}' if in_fstring => out.push_str("}}"),
            c => out.push(c),
        }
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    escape_into(&mut out, s, false);
    out.push('"');
    out
}

fn wrap(e: &Expr, parens: bool) -> String {
    if parens {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

/// Receiver of `.field`, `[...]`: must be an atom; a bare number would lex
/// `1.category` as a malformed literal.
fn postfix_operand(e: &Expr) -> String {
    wrap(e, e.precedence() < 11 || matches!(e, Expr::Number(_)))
}

pub fn expr(e: &Expr) -> String {
    match e {
        Expr::None => "None".into(),
        Expr::Bool(true) => "True".into(),
        Expr::Bool(false) => "False".into(),
        Expr::Number(n) => format_number(*n),
        Expr::Str(s) => quote(s),
        Expr::FString(parts) => {
            let mut out = String::from("f\"");
            for part in parts {
                match part {
                    FStringPart::Text(t) => escape_into(&mut out, t, true),
                    FStringPart::Expr { expr: inner, precision } => {
                        out.push('{');
                        let src = expr(inner);
                        // a leading '{' would read as an escaped brace
                        if src.starts_with('{') {
                            out.push(' ');
                        }
                        out.push_str(&src);
                        if let Some(p) = precision {
                            out.push_str(&format!(":.{p}f"));
                        }
                        out.push('}');
                    }
                }
            }
            out.push('"');
            out
        }
        Expr::Name(n) => n.clone(),
        Expr::List(items) => format!("[{}]", items.iter().map(expr).collect::<Vec<_>>().join(", ")),
        Expr::ListComp { elem, var, iter, cond } => {
            let mut out = format!("[{} for {var} in {}", expr(elem), wrap(iter, iter.precedence() < 1));
            if let Some(c) = cond {
                out.push_str(&format!(" if {}", expr(c)));
            }
            out.push(']');
            out
        }
        Expr::Member { object, field } => format!("{}.{}", postfix_operand(object), field.name()),
        Expr::Index { object, index } => format!("{}[{}]", postfix_operand(object), expr(index)),
        Expr::Slice { object, start, stop } => format!(
            "{}[{}:{}]",
            postfix_operand(object),
            start.as_deref().map(expr).unwrap_or_default(),
            stop.as_deref().map(expr).unwrap_or_default()
        ),
        Expr::Call { func, args } => {
            let rendered: Vec<String> = args
                .iter()
                .map(|a| match &a.name {
                    Some(n) => format!("{n}={}", expr(&a.value)),
                    None => expr(&a.value),
                })
                .collect();
            format!("{func}({})", rendered.join(", "))
        }
        Expr::Unary { op: UnaryOp::Not, operand } => format!("not {}", wrap(operand, operand.precedence() < 3)),
        Expr::Unary { op: UnaryOp::Neg, operand } => {
            let inner = wrap(operand, operand.precedence() < 9);
            // keep `- -x` from reading as one token in other tools
            if inner.starts_with('-') {
                format!("-({inner})")
            } else {
                format!("-{inner}")
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let (lp, rp) = match op {
                BinOp::Pow => (lhs.precedence() <= p, rhs.precedence() < 9),
                // comparisons do not associate: `(a < b) < c` is not a chain
                _ if p == 4 => (lhs.precedence() <= p, rhs.precedence() <= p),
                _ => (lhs.precedence() < p, rhs.precedence() <= p),
            };
            format!("{} {} {}", wrap(lhs, lp), op.symbol(), wrap(rhs, rp))
        }
    }
}
