//! Textual mini-languages shared by the tabular and shorthand formats:
//! guard conditions (`done(c1) and not violated(c2)`) and timing windows
//! (`< 7`, `in [60,60]`, `within 7 of c4`).

use std::fmt::{self, Write as _};

use crate::contract::{is_clause_name, Guard, TimeExpr};

/// Parse failure with a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.offset, self.message)
    }
}

/// Byte cursor over a string.
pub(crate) struct Cursor<'a> {
    pub src: &'a str,
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    pub fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t']);
        self.pos = self.src.len() - trimmed.len();
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }

    pub fn error<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { offset: self.pos, message: message.into() })
    }

    /// Consumes `lit` (after whitespace) if present.
    pub fn eat(&mut self, lit: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, lit: &str) -> Result<(), SyntaxError> {
        if self.eat(lit) {
            Ok(())
        } else {
            self.error(format!("expected `{lit}`"))
        }
    }

    /// Peeks the next identifier-like word without consuming it.
    pub fn peek_word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let end = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        &rest[..end]
    }

    /// Consumes a keyword (case-insensitive, whole word).
    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        let w = self.peek_word();
        if w.eq_ignore_ascii_case(kw) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    pub fn word(&mut self) -> Result<&'a str, SyntaxError> {
        let w = self.peek_word();
        if w.is_empty() {
            return self.error("expected a name");
        }
        self.pos += w.len();
        Ok(w)
    }

    pub fn name(&mut self) -> Result<String, SyntaxError> {
        let start = self.pos;
        let w = self.word()?;
        if !is_clause_name(w) {
            return Err(SyntaxError { offset: start, message: format!("invalid clause name `{w}`") });
        }
        Ok(w.to_string())
    }

    pub fn number(&mut self) -> Result<u32, SyntaxError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        if end == 0 {
            return self.error("expected a number");
        }
        let n = rest[..end].parse().or_else(|_| self.error("number out of range"))?;
        self.pos += end;
        Ok(n)
    }
}

// ---------------------------------------------------------------- guards

pub fn parse_guard(text: &str) -> Result<Guard, SyntaxError> {
    let mut cur = Cursor::new(text);
    let g = guard_expr(&mut cur)?;
    if !cur.at_end() {
        return cur.error("unexpected trailing input");
    }
    Ok(g)
}

/// Parses a guard starting at the cursor, leaving the cursor after it.
pub(crate) fn guard_expr(cur: &mut Cursor<'_>) -> Result<Guard, SyntaxError> {
    let mut lhs = guard_and(cur)?;
    while cur.eat_keyword("or") {
        let rhs = guard_and(cur)?;
        lhs = Guard::or(lhs, rhs);
    }
    Ok(lhs)
}

fn guard_and(cur: &mut Cursor<'_>) -> Result<Guard, SyntaxError> {
    let mut lhs = guard_unary(cur)?;
    while cur.eat_keyword("and") {
        let rhs = guard_unary(cur)?;
        lhs = Guard::and(lhs, rhs);
    }
    Ok(lhs)
}

fn guard_unary(cur: &mut Cursor<'_>) -> Result<Guard, SyntaxError> {
    if cur.eat_keyword("not") {
        return Ok(Guard::not(guard_unary(cur)?));
    }
    if cur.eat("(") {
        let g = guard_expr(cur)?;
        cur.expect(")")?;
        return Ok(g);
    }
    let done = if cur.eat_keyword("done") {
        true
    } else if cur.eat_keyword("violated") {
        false
    } else {
        return cur.error("expected `done(..)`, `violated(..)`, `not` or `(`");
    };
    cur.expect("(")?;
    let name = cur.name()?;
    cur.expect(")")?;
    Ok(if done { Guard::Done(name) } else { Guard::Violated(name) })
}

fn precedence(g: &Guard) -> u8 {
    match g {
        Guard::Or(..) => 1,
        Guard::And(..) => 2,
        _ => 3,
    }
}

pub fn print_guard(g: &Guard) -> String {
    let mut s = String::new();
    write_guard(&mut s, g);
    s
}

fn write_guard(out: &mut String, g: &Guard) {
    let paren = |out: &mut String, inner: &Guard, needed: bool| {
        if needed {
            out.push('(');
            write_guard(out, inner);
            out.push(')');
        } else {
            write_guard(out, inner);
        }
    };
    match g {
        Guard::Done(n) => {
            let _ = write!(out, "done({n})");
        }
        Guard::Violated(n) => {
            let _ = write!(out, "violated({n})");
        }
        Guard::Not(inner) => {
            out.push_str("not ");
            paren(out, inner, precedence(inner) < 3);
        }
        Guard::And(a, b) | Guard::Or(a, b) => {
            let p = precedence(g);
            paren(out, a, precedence(a) < p);
            out.push_str(if p == 2 { " and " } else { " or " });
            paren(out, b, precedence(b) <= p);
        }
    }
}

// ---------------------------------------------------------------- time

/// Parses the tabular time grammar:
/// `< N` | `<= N` | `>= N` | `in [N,M]` | `in [N,M)` | `within N of NAME`,
/// where the first five may be followed by `of NAME` to make them relative.
pub fn parse_time(text: &str) -> Result<TimeExpr, SyntaxError> {
    let mut cur = Cursor::new(text);
    let mut t = TimeExpr::default();
    if cur.eat_keyword("within") {
        t.high = Some(cur.number()?);
        t.strict = true;
        if !cur.eat_keyword("of") {
            return cur.error("expected `of <clause>`");
        }
        t.reference = Some(cur.name()?);
    } else {
        if cur.eat("<=") {
            t.high = Some(cur.number()?);
        } else if cur.eat("<") {
            t.high = Some(cur.number()?);
            t.strict = true;
        } else if cur.eat(">=") {
            t.low = Some(cur.number()?);
        } else if cur.eat_keyword("in") {
            cur.expect("[")?;
            t.low = Some(cur.number()?);
            cur.expect(",")?;
            t.high = Some(cur.number()?);
            if cur.eat(")") {
                t.strict = true;
            } else {
                cur.expect("]")?;
            }
        } else {
            return cur.error("expected `<`, `<=`, `>=`, `in [..]` or `within`");
        }
        if cur.eat_keyword("of") {
            t.reference = Some(cur.name()?);
        }
    }
    if !cur.at_end() {
        return cur.error("unexpected trailing input");
    }
    if let (Some(lo), Some(hi)) = (t.low, t.high) {
        if lo > hi {
            return Err(SyntaxError { offset: 0, message: format!("empty interval [{lo},{hi}]") });
        }
    }
    Ok(t)
}

pub fn print_time(t: &TimeExpr) -> String {
    let base = match (t.low, t.high) {
        (None, Some(h)) if t.strict => {
            if let Some(r) = &t.reference {
                return format!("within {h} of {r}");
            }
            format!("< {h}")
        }
        (None, Some(h)) => format!("<= {h}"),
        (Some(l), None) => format!(">= {l}"),
        (Some(l), Some(h)) => format!("in [{l},{h}{}", if t.strict { ")" } else { "]" }),
        (None, None) => String::new(),
    };
    match &t.reference {
        Some(r) => format!("{base} of {r}"),
        None => base,
    }
}
