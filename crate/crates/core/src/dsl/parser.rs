//! Recursive-descent parser over the token stream.

use super::ast::*;
use super::lexer::{tokenize, tokenize_at, FPiece, Tok, Token};
use super::SyntaxError;

const FORBIDDEN_KEYWORDS: [&str; 17] = [
    "def", "lambda", "import", "from", "while", "class", "return", "with", "try", "except", "finally", "raise",
    "global", "nonlocal", "del", "yield", "async",
];

const RESERVED: [&str; 11] = ["for", "in", "if", "else", "elif", "and", "or", "not", "True", "False", "None"];

fn method_hint(name: &str) -> &'static str {
    match name {
        "sort" => "; use sort_by_distance(objects) to order objects by distance",
        "append" | "extend" => "; build lists with list literals, comprehensions or `+`",
        "update" | "add" | "union" => "; combine sets with `|`",
        "intersection" => "; intersect sets with `&`",
        "join" => "; use join(items, separator)",
        _ => "",
    }
}

pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, i: 0 };
    let mut body = Vec::new();
    while p.peek() != &Tok::Eof {
        if p.eat_op(";") || p.peek() == &Tok::Newline {
            p.i += 1;
            continue;
        }
        body.extend(p.statement()?);
    }
    Ok(Program { body })
}

/// Parse a standalone expression (used for f-string fragments).
fn parse_fragment(src: &str, pos: Pos) -> Result<Expr, SyntaxError> {
    let tokens = tokenize_at(src, pos.line, pos.col, false)?;
    let mut p = Parser { tokens, i: 0 };
    let e = p.expr()?;
    if p.peek() != &Tok::Eof {
        return p.unexpected("in f-string expression");
    }
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.i].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let j = (self.i + off).min(self.tokens.len() - 1);
        &self.tokens[j].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.i].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.i].tok.clone();
        if self.i < self.tokens.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, pos: Pos, reason: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { line: pos.line, col: pos.col, reason: reason.into() })
    }

    fn unexpected<T>(&self, context: &str) -> Result<T, SyntaxError> {
        let what = self.peek().describe();
        let ctx = if context.is_empty() { String::new() } else { format!(" {context}") };
        self.err(self.pos(), format!("unexpected {what}{ctx}"))
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str, context: &str) -> Result<(), SyntaxError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            let what = self.peek().describe();
            self.err(self.pos(), format!("expected '{op}' {context}, found {what}"))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str, context: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            let what = self.peek().describe();
            self.err(self.pos(), format!("expected '{kw}' {context}, found {what}"))
        }
    }

    fn identifier(&mut self, context: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Name(n) if !RESERVED.contains(&n.as_str()) && !FORBIDDEN_KEYWORDS.contains(&n.as_str()) => {
                self.advance();
                Ok(n)
            }
            _ => {
                let what = self.peek().describe();
                self.err(self.pos(), format!("expected a name {context}, found {what}"))
            }
        }
    }

    fn end_of_simple_statement(&mut self) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Newline => {
                self.advance();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            Tok::Op(";") => {
                self.advance();
                if self.peek() == &Tok::Newline {
                    self.advance();
                }
                Ok(())
            }
            _ => self.unexpected("after statement"),
        }
    }

    /// One source statement; `elif` chains and simple statements separated by
    /// `;` may expand to several.
    fn statement(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let pos = self.pos();
        if let Tok::Name(n) = self.peek() {
            if FORBIDDEN_KEYWORDS.contains(&n.as_str()) {
                return self.err(pos, format!("'{n}' is not supported in this language"));
            }
            match n.as_str() {
                "for" => return Ok(vec![self.for_stmt()?]),
                "if" => return Ok(vec![self.if_stmt()?]),
                "else" | "elif" => return self.err(pos, format!("'{n}' without a matching 'if'")),
                "pass" | "break" | "continue" => {
                    return self.err(pos, format!("'{n}' is not supported in this language"))
                }
                _ => {}
            }
        }
        let stmt = self.simple_statement()?;
        self.end_of_simple_statement()?;
        Ok(vec![stmt])
    }

    fn simple_statement(&mut self) -> Result<Stmt, SyntaxError> {
        let pos = self.pos();
        if let Tok::Name(name) = self.peek().clone() {
            if let Tok::Op(op @ ("=" | "+=" | "-=" | "*=" | "/=")) = self.peek_at(1).clone() {
                if RESERVED.contains(&name.as_str()) {
                    return self.err(pos, format!("cannot assign to '{name}'"));
                }
                self.advance();
                self.advance();
                let value = self.expr()?;
                let value = match op {
                    "=" => value,
                    _ => {
                        let bin = match op {
                            "+=" => BinOp::Add,
                            "-=" => BinOp::Sub,
                            "*=" => BinOp::Mul,
                            _ => BinOp::Div,
                        };
                        Expr::Binary { op: bin, lhs: Box::new(Expr::Name(name.clone())), rhs: Box::new(value) }
                    }
                };
                return Ok(Stmt { kind: StmtKind::Assign { target: name, value }, pos });
            }
        }
        let e = self.expr()?;
        if let Tok::Op(op @ ("=" | "+=" | "-=" | "*=" | "/=")) = self.peek() {
            let what = match e {
                Expr::Member { .. } => "object attributes are read-only",
                Expr::Index { .. } | Expr::Slice { .. } => "item assignment is not supported",
                _ => "invalid assignment target",
            };
            return self.err(self.pos(), format!("cannot use '{op}' here: {what}"));
        }
        Ok(Stmt { kind: StmtKind::Expr(e), pos })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_op(":", "before block")?;
        if self.peek() != &Tok::Newline {
            // single-line suite: `if x: print(x)`
            let stmt = self.simple_statement()?;
            self.end_of_simple_statement()?;
            return Ok(vec![stmt]);
        }
        self.advance();
        if self.peek() != &Tok::Indent {
            return self.err(self.pos(), "expected an indented block");
        }
        self.advance();
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
            body.extend(self.statement()?);
        }
        if self.peek() == &Tok::Dedent {
            self.advance();
        }
        Ok(body)
    }

    fn for_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let pos = self.pos();
        self.expect_kw("for", "")?;
        let var = self.identifier("after 'for'")?;
        if self.is_op(",") {
            return self.err(self.pos(), "tuple unpacking in for-loops is not supported");
        }
        self.expect_kw("in", "in for-loop")?;
        let iter = self.expr()?;
        let body = self.block()?;
        Ok(Stmt { kind: StmtKind::For { var, iter, body }, pos })
    }

    fn if_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let pos = self.pos();
        self.advance(); // `if` or `elif`
        let cond = self.expr()?;
        let then = self.block()?;
        let otherwise = if self.is_kw("elif") {
            vec![self.if_stmt()?]
        } else if self.eat_kw("else") {
            self.block()?
        } else {
            Vec::new()
        };
        Ok(Stmt { kind: StmtKind::If { cond, then, otherwise }, pos })
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let e = self.or_expr()?;
        if self.is_kw("if") {
            return self.err(self.pos(), "conditional expressions (x if c else y) are not supported");
        }
        Ok(e)
    }

    fn or_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw("or") {
            let rhs = self.and_expr()?;
            lhs = Expr::Binary { op: BinOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw("and") {
            let rhs = self.not_expr()?;
            lhs = Expr::Binary { op: BinOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("not") {
            let operand = self.not_expr()?;
            return Ok(Expr::Unary { op: UnaryOp::Not, operand: Box::new(operand) });
        }
        self.comparison()
    }

    fn comparison_op(&mut self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Op("==") => BinOp::Eq,
            Tok::Op("!=") => BinOp::Ne,
            Tok::Op("<") => BinOp::Lt,
            Tok::Op("<=") => BinOp::Le,
            Tok::Op(">") => BinOp::Gt,
            Tok::Op(">=") => BinOp::Ge,
            Tok::Name(n) if n == "in" => BinOp::In,
            Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                self.advance();
                BinOp::NotIn
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    /// Chained comparisons `a < b < c` become `a < b and b < c`.
    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.bitor()?;
        let mut terms: Vec<Expr> = Vec::new();
        let mut lhs = first;
        while let Some(op) = self.comparison_op() {
            let rhs = self.bitor()?;
            terms.push(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs.clone()) });
            lhs = rhs;
        }
        if terms.is_empty() {
            return Ok(lhs);
        }
        let mut it = terms.into_iter();
        let mut acc = it.next().unwrap();
        for t in it {
            acc = Expr::Binary { op: BinOp::And, lhs: Box::new(acc), rhs: Box::new(t) };
        }
        Ok(acc)
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<Expr, SyntaxError>,
    ) -> Result<Expr, SyntaxError> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.eat_op(sym) {
                    let rhs = next(self)?;
                    lhs = Expr::Binary { op: *op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn bitor(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[("|", BinOp::BitOr)], Self::bitand)
    }

    fn bitand(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[("&", BinOp::BitAnd)], Self::additive)
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("//", BinOp::FloorDiv), ("%", BinOp::Mod)],
            Self::unary,
        )
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("-") {
            let operand = self.unary()?;
            return Ok(Expr::Unary { op: UnaryOp::Neg, operand: Box::new(operand) });
        }
        if self.eat_op("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.postfix()?;
        if self.eat_op("**") {
            let exp = self.unary()?;
            return Ok(Expr::Binary { op: BinOp::Pow, lhs: Box::new(base), rhs: Box::new(exp) });
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        loop {
            if self.is_op("(") {
                let pos = self.pos();
                let Expr::Name(func) = e else {
                    return self.err(pos, "only builtin functions can be called");
                };
                self.advance();
                let args = self.call_args()?;
                e = Expr::Call { func, args };
            } else if self.eat_op(".") {
                let pos = self.pos();
                let name = match self.advance() {
                    Tok::Name(n) => n,
                    other => return self.err(pos, format!("expected attribute name after '.', found {}", other.describe())),
                };
                let field = match name.as_str() {
                    "category" => Field::Category,
                    "xyz" => Field::Xyz,
                    other => {
                        return self.err(
                            pos,
                            format!(
                                "unsupported attribute or method '.{other}': objects only expose .category and .xyz{}",
                                method_hint(other)
                            ),
                        )
                    }
                };
                e = Expr::Member { object: Box::new(e), field };
            } else if self.is_op("[") {
                self.advance();
                e = self.subscript(e)?;
            } else {
                return Ok(e);
            }
        }
    }

    fn subscript(&mut self, object: Expr) -> Result<Expr, SyntaxError> {
        let object = Box::new(object);
        let start = if self.is_op(":") { None } else { Some(Box::new(self.expr()?)) };
        if self.eat_op(":") {
            let stop = if self.is_op("]") { None } else { Some(Box::new(self.expr()?)) };
            if self.is_op(":") {
                return self.err(self.pos(), "slice steps are not supported");
            }
            self.expect_op("]", "to close slice")?;
            return Ok(Expr::Slice { object, start, stop });
        }
        self.expect_op("]", "to close index")?;
        Ok(Expr::Index { object, index: start.unwrap() })
    }

    fn call_args(&mut self) -> Result<Vec<Arg>, SyntaxError> {
        let mut args: Vec<Arg> = Vec::new();
        while !self.is_op(")") {
            let pos = self.pos();
            let keyword = match (self.peek(), self.peek_at(1)) {
                (Tok::Name(n), Tok::Op("=")) => Some(n.clone()),
                _ => None,
            };
            if let Some(name) = keyword {
                self.advance();
                self.advance();
                if args.iter().any(|a| a.name.as_deref() == Some(name.as_str())) {
                    return self.err(pos, format!("keyword argument '{name}' repeated"));
                }
                let value = self.expr()?;
                args.push(Arg { name: Some(name), value });
            } else {
                if args.iter().any(|a| a.name.is_some()) {
                    return self.err(pos, "positional argument follows keyword argument");
                }
                let value = self.expr()?;
                if self.is_kw("for") {
                    return self.err(self.pos(), "generator expressions are not supported; use a list comprehension [...]");
                }
                args.push(Arg { name: None, value });
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")", "to close call")?;
        Ok(args)
    }

    fn list_display(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("]") {
            return Ok(Expr::List(Vec::new()));
        }
        let first = self.expr()?;
        if self.eat_kw("for") {
            let var = self.identifier("after 'for' in comprehension")?;
            self.expect_kw("in", "in comprehension")?;
            let iter = self.or_expr()?;
            let cond = if self.eat_kw("if") { Some(Box::new(self.or_expr()?)) } else { None };
            if self.is_kw("for") {
                return self.err(self.pos(), "nested comprehensions are not supported");
            }
            self.expect_op("]", "to close comprehension")?;
            return Ok(Expr::ListComp { elem: Box::new(first), var, iter: Box::new(iter), cond });
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            items.push(self.expr()?);
        }
        self.expect_op("]", "to close list")?;
        Ok(Expr::List(items))
    }

    fn fstring(&mut self, pieces: Vec<FPiece>) -> Result<Expr, SyntaxError> {
        let mut parts = Vec::with_capacity(pieces.len());
        for piece in pieces {
            match piece {
                FPiece::Text(t) => parts.push(FStringPart::Text(t)),
                FPiece::Expr { src, spec, pos } => {
                    let expr = parse_fragment(&src, pos)?;
                    let precision = match spec.as_deref() {
                        None | Some("") => None,
                        Some(s) => {
                            let digits = s.strip_prefix('.').and_then(|r| r.strip_suffix('f'));
                            match digits.and_then(|d| d.parse::<usize>().ok()) {
                                Some(n) if n <= 20 => Some(n),
                                _ => {
                                    return self.err(pos, format!("unsupported format spec ':{s}'; only ':.Nf' is supported"))
                                }
                            }
                        }
                    };
                    parts.push(FStringPart::Expr { expr, precision });
                }
            }
        }
        Ok(Expr::FString(parts))
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        match self.advance() {
            Tok::Number(n) => Ok(Expr::Number(n)),
            Tok::Str(mut s) => {
                // implicit concatenation of adjacent literals
                while let Tok::Str(next) = self.peek().clone() {
                    s.push_str(&next);
                    self.advance();
                }
                Ok(Expr::Str(s))
            }
            Tok::FStr(pieces) => self.fstring(pieces),
            Tok::Name(n) => match n.as_str() {
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                "None" => Ok(Expr::None),
                kw if FORBIDDEN_KEYWORDS.contains(&kw) => self.err(pos, format!("'{kw}' is not supported in this language")),
                kw if RESERVED.contains(&kw) => self.err(pos, format!("unexpected keyword '{kw}'")),
                _ => Ok(Expr::Name(n)),
            },
            Tok::Op("(") => {
                let e = self.expr()?;
                if self.is_op(",") {
                    return self.err(self.pos(), "tuples are not supported; use a list [...]");
                }
                self.expect_op(")", "to close parenthesis")?;
                Ok(e)
            }
            Tok::Op("[") => self.list_display(),
            Tok::Op("{") => self.err(pos, "dict and set literals are not supported; use set([...]) for sets"),
            other => {
                self.i = self.i.saturating_sub(1);
                let _ = other;
                self.err(pos, format!("unexpected {}", self.tokens[self.i].tok.describe()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_call() {
        let p = parse("object_set = scene()").unwrap();
        assert_eq!(
            p.body,
            vec![Stmt {
                kind: StmtKind::Assign {
                    target: "object_set".into(),
                    value: Expr::Call { func: "scene".into(), args: vec![] }
                },
                pos: Pos::default()
            }]
        );
        assert_eq!(p.body[0].pos.line, 1);
    }

    #[test]
    fn empty_source() {
        assert!(parse("").unwrap().body.is_empty());
        assert!(parse("\n\n# only a comment\n").unwrap().body.is_empty());
    }

    #[test]
    fn truncated_for() {
        let e = parse("for x in").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn keyword_args_and_blocks() {
        let src = "tables = filter(object_set=scene(), category=\"table\")\nfor t in tables:\n    if t.category == \"table\":\n        print(t.xyz[0])\n    else:\n        print(1)\n";
        let p = parse(src).unwrap();
        assert_eq!(p.body.len(), 2);
        let StmtKind::For { body, .. } = &p.body[1].kind else { panic!() };
        assert!(matches!(&body[0].kind, StmtKind::If { otherwise, .. } if otherwise.len() == 1));
    }

    #[test]
    fn elif_desugars_to_nested_if() {
        let p = parse("if a:\n    x = 1\nelif b:\n    x = 2\nelse:\n    x = 3\n").unwrap();
        let StmtKind::If { otherwise, .. } = &p.body[0].kind else { panic!() };
        assert!(matches!(&otherwise[0].kind, StmtKind::If { otherwise, .. } if otherwise.len() == 1));
    }

    #[test]
    fn rejects_methods_and_forbidden_constructs() {
        let e = parse("xs.sort(key=1)").unwrap_err();
        assert!(e.reason.contains("sort_by_distance"), "{}", e.reason);
        assert!(parse("import os").is_err());
        assert!(parse("def f():\n    pass\n").is_err());
        assert!(parse("while True:\n    x = 1\n").is_err());
        assert!(parse("f = lambda x: x").is_err());
        assert!(parse("x.category = 1").is_err());
        assert!(parse("a[0] = 1").is_err());
        assert!(parse("(1)(2)").is_err());
        assert!(parse("x = {}").is_err());
        assert!(parse("for a, b in c:\n    x = 1\n").is_err());
    }

    #[test]
    fn comprehension_and_slice() {
        let p = parse("c = [o.category for o in objs if o.category != \"wall\"][:3]").unwrap();
        let StmtKind::Assign { value: Expr::Slice { object, start, stop }, .. } = &p.body[0].kind else { panic!() };
        assert!(matches!(**object, Expr::ListComp { .. }));
        assert!(start.is_none());
        assert_eq!(stop.as_deref(), Some(&Expr::Number(3.0)));
    }

    #[test]
    fn operator_precedence() {
        let p = parse("x = 1 + 2 * 3 ** 2").unwrap();
        let StmtKind::Assign { value, .. } = &p.body[0].kind else { panic!() };
        let Expr::Binary { op: BinOp::Add, rhs, .. } = value else { panic!() };
        let Expr::Binary { op: BinOp::Mul, rhs, .. } = &**rhs else { panic!() };
        assert!(matches!(&**rhs, Expr::Binary { op: BinOp::Pow, .. }));
    }

    #[test]
    fn augmented_assignment() {
        let p = parse("n += 1").unwrap();
        let StmtKind::Assign { value, .. } = &p.body[0].kind else { panic!() };
        assert!(matches!(value, Expr::Binary { op: BinOp::Add, .. }));
    }

    #[test]
    fn fstring_with_precision() {
        let p = parse("print(f\"d = {d:.2f} m\")").unwrap();
        let StmtKind::Expr(Expr::Call { args, .. }) = &p.body[0].kind else { panic!() };
        let Expr::FString(parts) = &args[0].value else { panic!() };
        assert!(matches!(&parts[1], FStringPart::Expr { precision: Some(2), .. }));
        assert!(parse("print(f\"{d:>10}\")").is_err());
    }
}
