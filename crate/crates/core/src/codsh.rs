//! Shorthand notation: one line per top-level clause, reparations prefixed
//! with `|>`.
//!
//! ```text
//! contract "Course"
//! c1: O<student>(register for course)[t<7]
//! c2: (c2_1: D(assignment passed) /\ c2_2: O<student>(pass exam)[t>=60]) {done(c4)}
//! c3: O<student>(submit assignment)[t<=10] {done(c1)} |> c5
//! |> c5: O<student>(resubmit assignment)[t<=25]
//! ```
//!
//! Times are `[t<N]`, `[t<=N]`, `[t>=N]`, `[N,M]` or `[N,M)`, optionally
//! relative with `@name` before the closing bracket.

use std::fmt::Write as _;

use thiserror::Error;

use crate::contract::{
    validate, Action, Agent, Atomic, Clause, ClauseBody, Composite, Connective, ContractModel, Declaration, Diagnostic,
    Modality, TimeExpr,
};
use crate::notation::{guard_expr, print_guard, Cursor, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodshError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

impl CodshError {
    pub fn code(&self) -> &'static str {
        match self {
            CodshError::Syntax { .. } => "SYNTAX",
            CodshError::Invalid(_) => "INVARIANT_VIOLATION",
        }
    }

    pub fn location(&self) -> Option<String> {
        match self {
            CodshError::Syntax { line, col, .. } => Some(format!("{line}:{col}")),
            CodshError::Invalid(d) => d.first().map(|d| d.clause.clone()),
        }
    }
}

// ---------------------------------------------------------------- printing

pub fn print_codsh(model: &ContractModel) -> String {
    let mut out = format!("contract {}\n", quote(&model.title));
    for c in &model.clauses {
        write_clause(&mut out, c);
        out.push('\n');
    }
    for c in &model.reparations {
        out.push_str("|> ");
        write_clause(&mut out, c);
        out.push('\n');
    }
    out
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_clause(out: &mut String, c: &Clause) {
    let _ = write!(out, "{}: ", c.name);
    match &c.body {
        ClauseBody::Atomic(a) => {
            let _ = write!(out, "{}<{}>({})", a.modality.code(), a.agent, a.action.label());
            if let Some(t) = &a.time {
                write_time(out, t);
            }
        }
        ClauseBody::Declaration(d) => {
            out.push_str("D(");
            for ch in d.text.chars() {
                match ch {
                    ')' => out.push_str("\\)"),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\r' => out.push_str("\\r"),
                    ch => out.push(ch),
                }
            }
            out.push(')');
            if let Some(t) = &d.time {
                write_time(out, t);
            }
        }
        ClauseBody::Composite(comp) => {
            let sep = match comp.connective {
                Connective::Conjunction => " /\\ ",
                Connective::Choice => " \\/ ",
                Connective::Sequence => " ; ",
            };
            out.push('(');
            for (i, child) in comp.children.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                write_clause(out, child);
            }
            out.push(')');
        }
    }
    if let Some(g) = c.guard() {
        let _ = write!(out, " {{{}}}", print_guard(g));
    }
    if let Some(r) = c.reparation() {
        let _ = write!(out, " |> {r}");
    }
}

fn write_time(out: &mut String, t: &TimeExpr) {
    let at = t.reference.as_ref().map(|r| format!("@{r}")).unwrap_or_default();
    let _ = match (t.low, t.high) {
        (None, Some(h)) if t.strict => write!(out, "[t<{h}{at}]"),
        (None, Some(h)) => write!(out, "[t<={h}{at}]"),
        (Some(l), None) => write!(out, "[t>={l}{at}]"),
        (Some(l), Some(h)) => write!(out, "[{l},{h}{at}{}", if t.strict { ")" } else { "]" }),
        // not a valid window; printed so that the clause name is still visible
        (None, None) => write!(out, "[{at}]"),
    };
}

// ---------------------------------------------------------------- parsing

pub fn parse_codsh(text: &str) -> Result<ContractModel, CodshError> {
    let mut model = ContractModel::default();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let syntax = |e: SyntaxError| CodshError::Syntax {
            line: i + 1,
            col: line[..e.offset.min(line.len())].chars().count() + 1,
            message: e.message,
        };
        let mut cur = Cursor::new(line);
        if !header {
            if !cur.eat_keyword("contract") {
                return Err(syntax(SyntaxError { offset: cur.pos, message: "expected `contract \"title\"`".into() }));
            }
            model.title = quoted(&mut cur).map_err(syntax)?;
            end(&mut cur).map_err(syntax)?;
            header = true;
            continue;
        }
        let reparation = cur.eat("|>");
        let clause = clause(&mut cur).map_err(syntax)?;
        end(&mut cur).map_err(syntax)?;
        if reparation {
            model.reparations.push(clause);
        } else if !model.reparations.is_empty() {
            return Err(CodshError::Syntax { line: i + 1, col: 1, message: "clauses must precede reparations".into() });
        } else {
            model.clauses.push(clause);
        }
    }
    if !header {
        return Err(CodshError::Syntax { line: 1, col: 1, message: "expected `contract \"title\"`".into() });
    }
    let diags = validate(&model);
    if !diags.is_empty() {
        return Err(CodshError::Invalid(diags));
    }
    Ok(model)
}

fn end(cur: &mut Cursor<'_>) -> Result<(), SyntaxError> {
    if cur.at_end() {
        Ok(())
    } else {
        cur.error("unexpected trailing input")
    }
}

fn quoted(cur: &mut Cursor<'_>) -> Result<String, SyntaxError> {
    cur.expect("\"")?;
    let mut out = String::new();
    let mut chars = cur.rest().char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => {
                cur.pos += i + 1;
                return Ok(out);
            }
            '\\' => match chars.next() {
                Some((_, '"')) => out.push('"'),
                Some((_, '\\')) => out.push('\\'),
                Some((_, 'n')) => out.push('\n'),
                Some((_, 'r')) => out.push('\r'),
                _ => {
                    cur.pos += i;
                    return cur.error("bad escape in string");
                }
            },
            c => out.push(c),
        }
    }
    cur.error("unterminated string")
}

fn clause(cur: &mut Cursor<'_>) -> Result<Clause, SyntaxError> {
    let name = cur.name()?;
    cur.expect(":")?;
    cur.skip_ws();
    let start = cur.pos;
    let mut body = if cur.eat("(") {
        let mut children = vec![clause(cur)?];
        let mut connective = None;
        while !cur.eat(")") {
            let here = cur.pos;
            let c = if cur.eat("/\\") {
                Connective::Conjunction
            } else if cur.eat("\\/") {
                Connective::Choice
            } else if cur.eat(";") {
                Connective::Sequence
            } else {
                return cur.error("expected `/\\`, `\\/`, `;` or `)`");
            };
            if connective.is_some_and(|k| k != c) {
                cur.pos = here;
                return cur.error("mixed connectives; use nested parentheses");
            }
            connective = Some(c);
            children.push(clause(cur)?);
        }
        let Some(connective) = connective else {
            cur.pos = start;
            return cur.error("a refined clause needs at least two parts");
        };
        ClauseBody::Composite(Composite { connective, children, guard: None, reparation: None })
    } else if cur.eat("D(") {
        let text = declaration_text(cur)?;
        let time = opt_time(cur)?;
        ClauseBody::Declaration(Declaration { text, time })
    } else {
        let code = cur.rest().get(..1).unwrap_or("");
        let Some(modality) = Modality::from_code(code) else {
            return cur.error("expected `O<`, `P<`, `F<`, `D(` or `(`");
        };
        cur.pos += 1;
        cur.expect("<")?;
        let agent_at = cur.pos;
        let agent = cur.word()?;
        let agent = Agent::new(agent).map_err(|e| SyntaxError { offset: agent_at, message: e.to_string() })?;
        cur.expect(">")?;
        cur.expect("(")?;
        let phrase_at = cur.pos;
        let Some(close) = cur.rest().find(')') else {
            return cur.error("expected `)`");
        };
        let phrase = &cur.rest()[..close];
        let action = Action::from_phrase(phrase).map_err(|e| SyntaxError { offset: phrase_at, message: e.to_string() })?;
        cur.pos += close + 1;
        let time = opt_time(cur)?;
        ClauseBody::Atomic(Atomic { agent, modality, action, time, guard: None, reparation: None })
    };
    let guard = if cur.eat("{") {
        let g = guard_expr(cur)?;
        cur.expect("}")?;
        Some(g)
    } else {
        None
    };
    let reparation = if cur.eat("|>") { Some(cur.name()?) } else { None };
    match &mut body {
        ClauseBody::Atomic(a) => {
            a.guard = guard;
            a.reparation = reparation;
        }
        ClauseBody::Composite(c) => {
            c.guard = guard;
            c.reparation = reparation;
        }
        ClauseBody::Declaration(_) => {
            if guard.is_some() || reparation.is_some() {
                cur.pos = start;
                return cur.error("declarations take no guard or reparation");
            }
        }
    }
    Ok(Clause { name, body })
}

fn declaration_text(cur: &mut Cursor<'_>) -> Result<String, SyntaxError> {
    let mut out = String::new();
    let mut chars = cur.rest().char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            ')' => {
                cur.pos += i + 1;
                return Ok(out);
            }
            '\\' => match chars.next() {
                Some((_, ')')) => out.push(')'),
                Some((_, '\\')) => out.push('\\'),
                Some((_, 'n')) => out.push('\n'),
                Some((_, 'r')) => out.push('\r'),
                _ => {
                    cur.pos += i;
                    return cur.error("bad escape in declaration");
                }
            },
            c => out.push(c),
        }
    }
    cur.error("unterminated declaration, expected `)`")
}

fn opt_time(cur: &mut Cursor<'_>) -> Result<Option<TimeExpr>, SyntaxError> {
    if !cur.eat("[") {
        return Ok(None);
    }
    let start = cur.pos;
    let mut t = TimeExpr::default();
    let interval = if cur.eat("t") {
        if cur.eat("<=") {
            t.high = Some(cur.number()?);
        } else if cur.eat("<") {
            t.high = Some(cur.number()?);
            t.strict = true;
        } else if cur.eat(">=") {
            t.low = Some(cur.number()?);
        } else {
            return cur.error("expected `<`, `<=` or `>=` after `t`");
        }
        false
    } else {
        t.low = Some(cur.number()?);
        cur.expect(",")?;
        t.high = Some(cur.number()?);
        true
    };
    if cur.eat("@") {
        t.reference = Some(cur.name()?);
    }
    if interval && cur.eat(")") {
        t.strict = true;
    } else {
        cur.expect("]")?;
    }
    if let (Some(lo), Some(hi)) = (t.low, t.high) {
        if lo > hi {
            return Err(SyntaxError { offset: start, message: format!("empty interval [{lo},{hi}]") });
        }
    }
    Ok(Some(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::Guard;

    fn atomic(name: &str, agent: &str, m: Modality, phrase: &str) -> Clause {
        Clause::atomic(name, Agent::new(agent).unwrap(), m, Action::from_phrase(phrase).unwrap())
    }

    #[test]
    fn registration_line() {
        let m = ContractModel {
            title: "Course".into(),
            clauses: vec![atomic("c1", "student", Modality::Obligation, "register for course").with_time(TimeExpr::before(7))],
            reparations: vec![],
        };
        let text = print_codsh(&m);
        assert_eq!(text, "contract \"Course\"\nc1: O<student>(register for course)[t<7]\n");
        assert_eq!(parse_codsh(&text).unwrap(), m);
    }

    #[test]
    fn conjunction_of_two_obligations() {
        let m = parse_codsh("contract \"\"\nc2: (c2_1: O<student>(pass assignment) /\\ c2_2: O<student>(pass exam))\n").unwrap();
        let ClauseBody::Composite(c) = &m.clauses[0].body else { panic!() };
        assert_eq!(c.connective, Connective::Conjunction);
        assert_eq!(c.children.len(), 2);
        assert_eq!(c.children[1].as_atomic().unwrap().action.label(), "pass exam");
    }

    #[test]
    fn unknown_modality_is_a_syntax_error() {
        let e = parse_codsh("contract \"\"\nx: Q<a>(b)").unwrap_err();
        assert_eq!(e, CodshError::Syntax { line: 2, col: 4, message: "expected `O<`, `P<`, `F<`, `D(` or `(`".into() });
        assert_eq!(e.code(), "SYNTAX");
    }

    #[test]
    fn full_round_trip() {
        let m = ContractModel {
            title: "quote \" and \\ slash".into(),
            clauses: vec![
                Clause::declaration("c6", "exam (final) held\\", Some(TimeExpr::between(60, 60))),
                Clause::composite(
                    "c2",
                    Connective::Sequence,
                    vec![
                        atomic("c2_1", "a", Modality::Permission, "go").with_time(TimeExpr::from(3).relative_to("c6")),
                        Clause::composite(
                            "c2_2",
                            Connective::Choice,
                            vec![
                                atomic("x", "a", Modality::Prohibition, "smoke pipe_2").with_guard(Guard::not(Guard::done("c6"))),
                                atomic("y", "b_c", Modality::Obligation, "pay").with_time(TimeExpr { strict: true, ..TimeExpr::between(1, 4) }),
                            ],
                        ),
                    ],
                )
                .with_guard(Guard::or(Guard::done("c6"), Guard::violated("c1")))
                .with_reparation("r"),
                atomic("c1", "a", Modality::Obligation, "pay").with_time(TimeExpr::by(4).relative_to("c6")),
            ],
            reparations: vec![atomic("r", "a", Modality::Obligation, "pay fine").with_reparation("r2"), atomic("r2", "a", Modality::Obligation, "leave")],
        };
        let text = print_codsh(&m);
        assert_eq!(parse_codsh(&text).unwrap(), m, "{text}");
        assert_eq!(print_codsh(&parse_codsh(&text).unwrap()), text);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_codsh("").unwrap_err().code(), "SYNTAX");
        assert_eq!(parse_codsh("contract \"\"\nc1: (c1_1: O<a>(go))").unwrap_err().code(), "SYNTAX");
        assert_eq!(parse_codsh("contract \"\"\nc1: (a: O<a>(go) /\\ b: O<a>(go) \\/ c: O<a>(go))").unwrap_err().code(), "SYNTAX");
        assert_eq!(parse_codsh("contract \"\"\nc1: O<a>(go)[5,2]").unwrap_err().code(), "SYNTAX");
        assert_eq!(parse_codsh("contract \"\"\nc1: O<a>(go) {done(zz)}").unwrap_err().code(), "INVARIANT_VIOLATION");
        assert_eq!(parse_codsh("contract \"\"\nc1: O<a>(go) junk").unwrap_err().code(), "SYNTAX");
    }
}
