//! Tokenizer with Python-style indentation tracking.

use super::ast::Pos;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum FPiece {
    Text(String),
    Expr { src: String, spec: Option<String>, pos: Pos },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Number(f64),
    Str(String),
    FStr(Vec<FPiece>),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("'{n}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(_) | Tok::FStr(_) => "string".into(),
            Tok::Op(o) => format!("'{o}'"),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const OPERATORS: [&str; 30] = [
    "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "<", ">", "=", "+", "-", "*", "/", "%", "(", ")",
    "[", "]", "{", "}", ",", ":", ".", "|", "&", ";",
];

struct Lexer<'a> {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
    depth: usize,
    fragment: bool,
    need_indent: bool,
    indents: Vec<usize>,
    out: Vec<Token>,
    _src: std::marker::PhantomData<&'a str>,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    tokenize_at(src, 1, 1, true)
}

/// Tokenize a fragment (f-string expression) whose first character sits at
/// `line`/`col` of the enclosing source.
pub fn tokenize_at(src: &str, line: usize, col: usize, track_indent: bool) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        i: 0,
        line,
        col,
        depth: 0,
        fragment: !track_indent,
        need_indent: track_indent,
        indents: vec![0],
        out: Vec::new(),
        _src: std::marker::PhantomData,
    };
    lx.run()?;
    Ok(lx.out)
}

impl Lexer<'_> {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.i + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.i).copied()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn err<T>(&self, pos: Pos, msg: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { line: pos.line, col: pos.col, reason: msg.into() })
    }

    fn push(&mut self, tok: Tok, pos: Pos) {
        self.out.push(Token { tok, pos });
    }

    fn at_line_start(&self) -> bool {
        matches!(self.out.last(), None | Some(Token { tok: Tok::Newline, .. }))
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        loop {
            if self.need_indent && self.depth == 0 {
                if self.handle_indentation()? {
                    continue;
                }
                self.need_indent = false;
            }
            let Some(c) = self.peek(0) else { break };
            let pos = self.pos();
            match c {
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '\\' if self.peek(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 && !self.fragment {
                        if !self.at_line_start() {
                            self.push(Tok::Newline, pos);
                        }
                        self.need_indent = true;
                    }
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number(pos)?;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let is_f = matches!(c, 'f' | 'F') && matches!(self.peek(1), Some('"' | '\''));
                    if is_f {
                        self.bump();
                        let quote = self.bump().unwrap();
                        let pieces = self.fstring(quote, pos)?;
                        self.push(Tok::FStr(pieces), pos);
                    } else {
                        let mut name = String::new();
                        while let Some(c) = self.peek(0).filter(|c| c.is_alphanumeric() || *c == '_') {
                            name.push(c);
                            self.bump();
                        }
                        self.push(Tok::Name(name), pos);
                    }
                }
                '"' | '\'' => {
                    self.bump();
                    let s = self.string(c, pos)?;
                    self.push(Tok::Str(s), pos);
                }
                _ => {
                    let rest: String = self.chars[self.i..self.chars.len().min(self.i + 2)].iter().collect();
                    let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
                        return self.err(pos, format!("unexpected character '{c}'"));
                    };
                    for _ in 0..op.len() {
                        self.bump();
                    }
                    match *op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => {
                            if self.depth == 0 {
                                return self.err(pos, format!("unmatched '{op}'"));
                            }
                            self.depth -= 1;
                        }
                        _ => {}
                    }
                    self.push(Tok::Op(op), pos);
                }
            }
        }
        let end = self.pos();
        if self.depth > 0 && !self.fragment {
            return self.err(end, "unexpected end of input: unclosed bracket");
        }
        if !self.fragment && !self.at_line_start() {
            self.push(Tok::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, end);
        }
        self.push(Tok::Eof, end);
        Ok(())
    }

    /// Measures indentation at the start of a logical line. Returns true when
    /// the line was blank or a comment and has been consumed.
    fn handle_indentation(&mut self) -> Result<bool, SyntaxError> {
        let mut width = 0;
        let mut j = self.i;
        while let Some(&c) = self.chars.get(j) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\r' => {}
                _ => break,
            }
            j += 1;
        }
        match self.chars.get(j) {
            None => {
                while self.i < j {
                    self.bump();
                }
                return Ok(false);
            }
            Some('\n') | Some('#') => {
                while self.peek(0).is_some_and(|c| c != '\n') {
                    self.bump();
                }
                if self.peek(0).is_some() {
                    self.bump();
                    return Ok(true);
                }
                return Ok(false);
            }
            _ => {}
        }
        while self.i < j {
            self.bump();
        }
        let pos = self.pos();
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent, pos);
        } else if width < current {
            while width < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push(Tok::Dedent, pos);
            }
            if width != *self.indents.last().unwrap() {
                return self.err(pos, "unindent does not match any outer indentation level");
            }
        }
        Ok(false)
    }

    fn number(&mut self, pos: Pos) -> Result<(), SyntaxError> {
        let mut text = String::new();
        while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit() || *c == '.' || *c == '_') {
            if c != '_' {
                text.push(c);
            }
            self.bump();
        }
        if matches!(self.peek(0), Some('e' | 'E')) {
            let sign = matches!(self.peek(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                for _ in 0..=digit_at - 1 {
                    text.push(self.bump().unwrap());
                }
                while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
                    text.push(c);
                    self.bump();
                }
            }
        }
        if self.peek(0).is_some_and(|c| c.is_alphabetic() || c == '_') {
            return self.err(pos, format!("invalid number literal '{text}{}'", self.peek(0).unwrap()));
        }
        match text.parse::<f64>() {
            Ok(v) => {
                self.push(Tok::Number(v), pos);
                Ok(())
            }
            Err(_) => self.err(pos, format!("invalid number literal '{text}'")),
        }
    }

    fn escape(&mut self, pos: Pos) -> Result<char, SyntaxError> {
        match self.bump() {
            Some('n') => Ok('\n'),
            Some('t') => Ok('\t'),
            Some('r') => Ok('\r'),
            Some('0') => Ok('\0'),
            Some(c @ ('\\' | '\'' | '"' | '{' | '}')) => Ok(c),
            Some(other) => self.err(pos, format!("unsupported escape sequence '\\{other}'")),
            None => self.err(pos, "unterminated string literal"),
        }
    }

    fn string(&mut self, quote: char, pos: Pos) -> Result<String, SyntaxError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return self.err(pos, "unterminated string literal"),
                Some('\\') => {
                    let p = self.pos();
                    s.push(self.escape(p)?);
                }
                Some(c) if c == quote => return Ok(s),
                Some(c) => s.push(c),
            }
        }
    }

    /// Scans the raw source of a string literal embedded in an f-string
    /// expression, returning it verbatim including quotes.
    fn raw_nested_string(&mut self, pos: Pos) -> Result<String, SyntaxError> {
        let mut raw = String::new();
        let quote = self.bump().unwrap();
        raw.push(quote);
        loop {
            match self.bump() {
                None | Some('\n') => return self.err(pos, "unterminated string literal inside f-string"),
                Some('\\') => {
                    raw.push('\\');
                    if let Some(c) = self.bump() {
                        raw.push(c);
                    }
                }
                Some(c) => {
                    raw.push(c);
                    if c == quote {
                        return Ok(raw);
                    }
                }
            }
        }
    }

    fn fstring(&mut self, quote: char, pos: Pos) -> Result<Vec<FPiece>, SyntaxError> {
        let mut pieces = Vec::new();
        let mut text = String::new();
        loop {
            match self.peek(0) {
                None | Some('\n') => return self.err(pos, "unterminated f-string literal"),
                Some(c) if c == quote => {
                    self.bump();
                    break;
                }
                Some('\\') => {
                    self.bump();
                    let p = self.pos();
                    text.push(self.escape(p)?);
                }
                Some('{') if self.peek(1) == Some('{') => {
                    self.bump();
                    self.bump();
                    text.push('{');
                }
                Some('}') if self.peek(1) == Some('}') => {
                    self.bump();
                    self.bump();
                    text.push('}');
                }
                Some('}') => return self.err(self.pos(), "single '}' is not allowed in f-string"),
                Some('{') => {
                    self.bump();
                    if !text.is_empty() {
                        pieces.push(FPiece::Text(std::mem::take(&mut text)));
                    }
                    let expr_pos = self.pos();
                    let mut src = String::new();
                    let mut spec = None;
                    let mut depth = 0usize;
                    loop {
                        match self.peek(0) {
                            None | Some('\n') => return self.err(pos, "unterminated expression in f-string"),
                            Some('"' | '\'') => {
                                let p = self.pos();
                                src.push_str(&self.raw_nested_string(p)?);
                            }
                            Some(c @ ('(' | '[' | '{')) => {
                                depth += 1;
                                src.push(c);
                                self.bump();
                            }
                            Some(c @ (')' | ']')) => {
                                depth = depth.saturating_sub(1);
                                src.push(c);
                                self.bump();
                            }
                            Some('}') if depth > 0 => {
                                depth -= 1;
                                src.push('}');
                                self.bump();
                            }
                            Some('}') => {
                                self.bump();
                                break;
                            }
                            Some(':') if depth == 0 => {
                                self.bump();
                                let mut s = String::new();
                                while let Some(c) = self.peek(0).filter(|c| *c != '}' && *c != '\n') {
                                    s.push(c);
                                    self.bump();
                                }
                                spec = Some(s);
                            }
                            Some(c) => {
                                src.push(c);
                                self.bump();
                            }
                        }
                    }
                    if src.trim().is_empty() {
                        return self.err(expr_pos, "empty expression in f-string");
                    }
                    pieces.push(FPiece::Expr { src, spec, pos: expr_pos });
                }
                Some(c) => {
                    self.bump();
                    text.push(c);
                }
            }
        }
        if !text.is_empty() {
            pieces.push(FPiece::Text(text));
        }
        Ok(pieces)
    }
}
