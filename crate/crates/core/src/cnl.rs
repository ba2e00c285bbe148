//! Controlled-English rendering of a contract model.
//!
//! Every clause gets one line, labelled `[name]`. Words in agents, actions
//! and declarations are checked against a [`Lexicon`]; clauses with unknown
//! words keep their label but are not verbalized, and the unknown words are
//! reported alongside the text.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use thiserror::Error;

use crate::contract::{Clause, ClauseBody, Connective, ContractModel, Guard, Modality, TimeExpr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexEntry {
    pub pos: String,
    pub third_singular: Option<String>,
    pub past_participle: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

/// Word list keyed by lemma. Inflected forms stored with an entry are also
/// accepted by [`Lexicon::contains`].
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, LexEntry>,
    forms: HashSet<String>,
}

static DEFAULT: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::parse(include_str!("../data/lexicon.tsv")).expect("bundled lexicon is well formed"));

impl Lexicon {
    /// The bundled English word list.
    pub fn english() -> &'static Lexicon {
        &DEFAULT
    }

    /// Reads `lemma<TAB>pos<TAB>s3<TAB>pastpart` lines; `-` marks a missing form.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            let [lemma, pos, s3, pp] = cells[..] else {
                return Err(LexiconError { line: i + 1, message: format!("expected 4 cells, found {}", cells.len()) });
            };
            if lemma.is_empty() {
                return Err(LexiconError { line: i + 1, message: "empty lemma".into() });
            }
            let form = |s: &str| (s != "-" && !s.is_empty()).then(|| s.to_lowercase());
            let entry = LexEntry { pos: pos.to_string(), third_singular: form(s3), past_participle: form(pp) };
            lex.forms.extend(entry.third_singular.iter().chain(entry.past_participle.iter()).cloned());
            lex.entries.insert(lemma.to_lowercase(), entry);
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, lemma: &str) -> Option<&LexEntry> {
        self.entries.get(&lemma.to_lowercase())
    }

    pub fn contains(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        self.entries.contains_key(&w) || self.forms.contains(&w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verbalization {
    pub text: String,
    /// Unknown words in order of first occurrence.
    pub misses: Vec<String>,
}

impl Verbalization {
    pub fn is_complete(&self) -> bool {
        self.misses.is_empty()
    }
}

pub fn verbalize(model: &ContractModel, lexicon: &Lexicon) -> Verbalization {
    let mut v = Writer { lexicon, out: Verbalization::default(), seen: HashSet::new() };
    for c in model.clauses.iter().chain(model.reparations.iter()) {
        v.clause(c, 0);
    }
    v.out
}

struct Writer<'a> {
    lexicon: &'a Lexicon,
    out: Verbalization,
    seen: HashSet<String>,
}

impl Writer<'_> {
    /// Words of `text` the lexicon lacks. Tokens with digits are not words.
    fn unknown(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .filter(|w| !w.is_empty() && !w.chars().any(|c| c.is_ascii_digit()))
            .filter(|w| !self.lexicon.contains(w))
            .map(str::to_lowercase)
            .collect()
    }

    fn line(&mut self, depth: usize, name: &str, body: String, words: &[&str]) {
        let indent = "  ".repeat(depth);
        let missing: Vec<String> = words.iter().flat_map(|w| self.unknown(w)).collect();
        if missing.is_empty() {
            self.out.text.push_str(&format!("{indent}[{name}] {body}\n"));
            return;
        }
        let list: Vec<String> = missing.iter().map(|w| format!("\"{w}\"")).collect();
        self.out.text.push_str(&format!("{indent}[{name}] (not verbalized: unknown {})\n", list.join(", ")));
        for w in missing {
            if self.seen.insert(w.clone()) {
                self.out.misses.push(w);
            }
        }
    }

    fn clause(&mut self, c: &Clause, depth: usize) {
        match &c.body {
            ClauseBody::Atomic(a) => {
                let agent = a.agent.as_str().replace('_', " ");
                let modal = match a.modality {
                    Modality::Obligation => "must",
                    Modality::Permission => "may",
                    Modality::Prohibition => "must not",
                };
                let mut body = guard_prefix(a.guard.as_ref());
                body.push_str(&format!("the {agent} {modal} {}", a.action.label()));
                if let Some(t) = &a.time {
                    body.push(' ');
                    body.push_str(&time_phrase(t));
                }
                if let Some(r) = &a.reparation {
                    body.push_str(&format!(", otherwise [{r}] applies"));
                }
                self.line(depth, &c.name, body, &[&agent, a.action.verb(), a.action.object()]);
            }
            ClauseBody::Declaration(d) => {
                let mut body = d.text.clone();
                if let Some(t) = &d.time {
                    body.push(' ');
                    body.push_str(&time_phrase(t));
                }
                self.line(depth, &c.name, body, &[&d.text]);
            }
            ClauseBody::Composite(comp) => {
                let mut body = guard_prefix(comp.guard.as_ref());
                body.push_str(match comp.connective {
                    Connective::Conjunction => "and both of",
                    Connective::Choice => "or one of",
                    Connective::Sequence => "then, in order",
                });
                if let Some(r) = &comp.reparation {
                    body.push_str(&format!(" (otherwise [{r}] applies)"));
                }
                body.push(':');
                self.line(depth, &c.name, body, &[]);
                for child in &comp.children {
                    self.clause(child, depth + 1);
                }
            }
        }
    }
}

fn guard_prefix(g: Option<&Guard>) -> String {
    match g {
        Some(g) => format!("if {}, then ", guard_phrase(g)),
        None => String::new(),
    }
}

fn guard_phrase(g: &Guard) -> String {
    match g {
        Guard::Done(c) => format!("[{c}] is done"),
        Guard::Violated(c) => format!("[{c}] is violated"),
        Guard::Not(inner) => match inner.as_ref() {
            Guard::Done(c) => format!("[{c}] is not done"),
            Guard::Violated(c) => format!("[{c}] is not violated"),
            other => format!("not ({})", guard_phrase(other)),
        },
        Guard::And(a, b) => format!("{} and {}", operand(a), operand(b)),
        Guard::Or(a, b) => format!("{} or {}", operand(a), operand(b)),
    }
}

/// Nested binary operands are always bracketed so that grouping is explicit.
fn operand(inner: &Guard) -> String {
    match inner {
        Guard::And(..) | Guard::Or(..) => format!("({})", guard_phrase(inner)),
        _ => guard_phrase(inner),
    }
}

pub fn time_phrase(t: &TimeExpr) -> String {
    match &t.reference {
        None => match (t.low, t.high) {
            (None, Some(h)) if t.strict => format!("before time {h}"),
            (None, Some(h)) => format!("by time {h}"),
            (Some(l), None) => format!("from time {l}"),
            (Some(l), Some(h)) if l == h && !t.strict => format!("at time {l}"),
            (Some(l), Some(h)) if t.strict => format!("from time {l} and before time {h}"),
            (Some(l), Some(h)) => format!("between time {l} and {h}"),
            (None, None) => String::new(),
        },
        Some(r) => match (t.low, t.high) {
            (None, Some(h)) if t.strict => format!("within {h} time units of [{r}]"),
            (None, Some(h)) => format!("within at most {h} time units of [{r}]"),
            (Some(l), None) => format!("at least {l} time units after [{r}]"),
            (Some(l), Some(h)) if t.strict => format!("at least {l} and less than {h} time units after [{r}]"),
            (Some(l), Some(h)) => format!("between {l} and {h} time units after [{r}]"),
            (None, None) => format!("relative to [{r}]"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{Action, Agent};

    fn student(name: &str, m: Modality, phrase: &str) -> Clause {
        Clause::atomic(name, Agent::new("student").unwrap(), m, Action::from_phrase(phrase).unwrap())
    }

    fn model(clauses: Vec<Clause>) -> ContractModel {
        ContractModel { title: "t".into(), clauses, reparations: vec![] }
    }

    #[test]
    fn bundled_lexicon_loads() {
        let lex = Lexicon::english();
        assert!(lex.len() >= 5000);
        assert!(lex.contains("Register"));
        assert!(lex.contains("held"));
        assert!(lex.contains("students"));
        assert!(!lex.contains("zzz"));
        assert_eq!(lex.get("hold").unwrap().past_participle.as_deref(), Some("held"));
    }

    #[test]
    fn registration_clause() {
        let m = model(vec![student("c1", Modality::Obligation, "register for course").with_time(TimeExpr::before(7))]);
        let v = verbalize(&m, Lexicon::english());
        assert_eq!(v.text, "[c1] the student must register for course before time 7\n");
        assert!(v.is_complete());
    }

    #[test]
    fn empty_model_is_empty_text() {
        assert_eq!(verbalize(&ContractModel::default(), Lexicon::english()), Verbalization::default());
    }

    #[test]
    fn unknown_word_is_reported_and_others_survive() {
        let m = model(vec![
            student("c1", Modality::Obligation, "zzz homework"),
            student("c2", Modality::Permission, "zzz"),
            student("c3", Modality::Prohibition, "submit assignment").with_time(TimeExpr::by(10)),
        ]);
        let v = verbalize(&m, Lexicon::english());
        assert_eq!(v.misses, ["zzz"]);
        assert_eq!(
            v.text,
            "[c1] (not verbalized: unknown \"zzz\")\n[c2] (not verbalized: unknown \"zzz\")\n[c3] the student must not submit assignment by time 10\n"
        );
    }

    #[test]
    fn guards_reparations_and_composites() {
        let c = Clause::composite(
            "c2",
            Connective::Conjunction,
            vec![
                Clause::declaration("c2_1", "assignment passed", None),
                student("c2_2", Modality::Obligation, "pass exam")
                    .with_guard(Guard::and(Guard::done("c7"), Guard::not(Guard::violated("c1")))),
            ],
        )
        .with_guard(Guard::done("c4"));
        let m = ContractModel {
            title: "t".into(),
            clauses: vec![c, student("c1", Modality::Obligation, "pay").with_reparation("c9")],
            reparations: vec![student("c9", Modality::Obligation, "pay fine")],
        };
        let v = verbalize(&m, Lexicon::english());
        assert_eq!(
            v.text,
            "[c2] if [c4] is done, then and both of:\n  [c2_1] assignment passed\n  [c2_2] if [c7] is done and [c1] is not violated, then the student must pass exam\n[c1] the student must pay, otherwise [c9] applies\n[c9] the student must pay fine\n"
        );
    }

    #[test]
    fn time_phrases_are_distinct() {
        let forms = [
            TimeExpr::before(5),
            TimeExpr::by(5),
            TimeExpr::from(5),
            TimeExpr::between(5, 5),
            TimeExpr::between(4, 5),
            TimeExpr { strict: true, ..TimeExpr::between(4, 5) },
            TimeExpr::before(5).relative_to("c1"),
            TimeExpr::by(5).relative_to("c1"),
            TimeExpr::from(5).relative_to("c1"),
            TimeExpr::between(4, 5).relative_to("c1"),
            TimeExpr { strict: true, ..TimeExpr::between(4, 5) }.relative_to("c1"),
        ];
        let phrases: HashSet<String> = forms.iter().map(time_phrase).collect();
        assert_eq!(phrases.len(), forms.len());
        assert_eq!(time_phrase(&TimeExpr::between(60, 60)), "at time 60");
        assert_eq!(time_phrase(&TimeExpr::before(7).relative_to("c4")), "within 7 time units of [c4]");
    }

    #[test]
    fn nested_guard_phrases_are_bracketed() {
        let g = Guard::or(Guard::and(Guard::done("a"), Guard::done("b")), Guard::not(Guard::or(Guard::done("c"), Guard::done("d"))));
        assert_eq!(guard_phrase(&g), "([a] is done and [b] is done) or not ([c] is done or [d] is done)");
    }
}
