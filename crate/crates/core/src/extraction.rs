//! Rule-based clause extraction from English text.
//!
//! Each sentence becomes one row (plus sub-rows when it joins several
//! actions). Rules are surface patterns: modal markers decide the modality
//! and split subject from predicate, temporal phrases become the time
//! column, and a leading `If ...,` becomes a condition on the previous
//! clause. Cells left empty need post-editing.

use std::sync::LazyLock;

use regex::{Captures, Regex};
use thiserror::Error;

use crate::tsv::{name_for_id, ClauseRow, RowConnective, RowModality, TsvTable};

const NUMBER: &str = r"(?P<n>\d+|one|two|three|four|five|six|seven|eight|nine|ten)";
const UNIT: &str = r"(?P<unit>days?|weeks?)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rules line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct MarkerRule {
    pub source: String,
    pub regex: Regex,
    pub modality: RowModality,
}

#[derive(Debug, Clone)]
pub struct ConnectiveRule {
    pub source: String,
    pub regex: Regex,
    pub connective: RowConnective,
}

#[derive(Debug, Clone)]
pub struct TemporalRule {
    pub source: String,
    pub regex: Regex,
    pub template: String,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub markers: Vec<MarkerRule>,
    pub connectives: Vec<ConnectiveRule>,
    pub temporal: Vec<TemporalRule>,
}

static DEFAULT_RULES: LazyLock<RuleSet> =
    LazyLock::new(|| RuleSet::parse(include_str!("../data/rules.tsv")).expect("bundled rules are well formed"));

impl RuleSet {
    pub fn english() -> &'static RuleSet {
        &DEFAULT_RULES
    }

    /// Reads `pattern<TAB>code` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = RuleSet { markers: vec![], connectives: vec![], temporal: vec![] };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RuleError { line: i + 1, message };
            let (pattern, code) = line.split_once('\t').ok_or_else(|| err("expected `pattern<TAB>code`".into()))?;
            let expanded = pattern
                .replace("{N}", NUMBER)
                .replace("{UNIT}", UNIT)
                .replace("{X}", "(?P<x>.+?)")
                .replace("{Y}", "(?P<y>.+)");
            let regex = Regex::new(&format!(r"(?i)\b(?:{expanded})")).map_err(|e| err(e.to_string()))?;
            let source = pattern.to_string();
            let code = code.trim();
            if let Some(template) = code.strip_prefix("TIME ") {
                if !regex.capture_names().any(|n| n == Some("n")) {
                    return Err(err("temporal patterns need {N}".into()));
                }
                rules.temporal.push(TemporalRule { source, regex, template: template.trim().to_string() });
            } else if let Some(connective) = RowConnective::parse(code).filter(|c| *c != RowConnective::None) {
                if !(regex.capture_names().any(|n| n == Some("x")) && regex.capture_names().any(|n| n == Some("y"))) {
                    return Err(err("connective patterns need {X} and {Y}".into()));
                }
                rules.connectives.push(ConnectiveRule { source, regex, connective });
            } else {
                match RowModality::parse(code) {
                    Some(m) if m != RowModality::Unknown => {
                        let regex = Regex::new(&format!(r"(?i)\b(?:{expanded})\b")).map_err(|e| err(e.to_string()))?;
                        rules.markers.push(MarkerRule { source, regex, modality: m });
                    }
                    _ => return Err(err(format!("unknown code `{code}`"))),
                }
            }
        }
        if rules.markers.is_empty() {
            return Err(RuleError { line: 0, message: "no modality markers".into() });
        }
        Ok(rules)
    }
}

/// Splits on `.`, `!` or `?` followed by whitespace or the end of input.
/// "e.g." and "i.e." do not end a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (j, &(i, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let next = chars.get(j + 1).map(|&(_, n)| n);
        if next.is_some_and(|n| !n.is_whitespace()) {
            continue;
        }
        let before = text[..i + 1].to_lowercase();
        if before.ends_with("e.g.") || before.ends_with("i.e.") {
            continue;
        }
        let s = text[start..i + 1].trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
        start = i + 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

fn number(word: &str) -> Option<u32> {
    const WORDS: [&str; 10] = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    let w = word.to_lowercase();
    w.parse().ok().or_else(|| WORDS.iter().position(|&x| x == w).map(|i| i as u32 + 1))
}

static CONDITION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^if\b([^,]*),\s*").unwrap());
static NEGATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bnot\b|n't\b").unwrap());
const DETERMINERS: [&str; 7] = ["the", "a", "an", "all", "each", "every", "any"];
const AUXILIARIES: [&str; 5] = ["to", "be", "been", "have", "being"];

/// Lowercased words with punctuation and hyphens removed.
fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric() || *c == '_').collect::<String>().to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn tidy(text: &str) -> String {
    let s = text.split_whitespace().collect::<Vec<_>>().join(" ");
    s.replace(" ,", ",").trim_matches(|c: char| c == ',' || c == ';' || c.is_whitespace()).to_string()
}

/// Head noun of a noun phrase, naively singularized.
fn head_noun(np: &str) -> String {
    let np = np.rsplit(',').next().unwrap_or("");
    let ws: Vec<String> = words(np).into_iter().filter(|w| !DETERMINERS.contains(&w.as_str())).collect();
    let Some(head) = ws.last() else { return String::new() };
    if head.ends_with('s') && !head.ends_with("ss") && head.len() > 1 {
        head[..head.len() - 1].to_string()
    } else {
        head.clone()
    }
}

/// Action words of a predicate: auxiliaries dropped from the front,
/// articles dropped anywhere, `it` resolved to the previous object.
fn action_words(predicate: &str, previous_object: &str) -> Vec<String> {
    let mut ws = words(predicate);
    while ws.first().is_some_and(|w| AUXILIARIES.contains(&w.as_str())) {
        ws.remove(0);
    }
    let mut out = Vec::new();
    for w in ws {
        match w.as_str() {
            "the" | "a" | "an" => {}
            "it" if !previous_object.is_empty() => out.extend(previous_object.split(' ').map(str::to_string)),
            _ => out.push(w),
        }
    }
    out
}

#[derive(Default)]
struct Context {
    previous_id: Option<String>,
    previous_object: String,
    declared_day: Option<u32>,
}

fn apply_temporal(rules: &RuleSet, text: &str, ctx: &Context) -> (String, String) {
    for rule in &rules.temporal {
        let Some(caps) = rule.regex.captures(text) else { continue };
        let Some(time) = instantiate(&rule.template, &caps, ctx) else { continue };
        let m = caps.get(0).unwrap();
        let rest = format!("{} {}", &text[..m.start()], &text[m.end()..]);
        return (tidy(&rest), time);
    }
    (text.to_string(), String::new())
}

fn instantiate(template: &str, caps: &Captures<'_>, ctx: &Context) -> Option<String> {
    let mut n = number(caps.name("n")?.as_str())?;
    if caps.name("unit").is_some_and(|u| u.as_str().to_lowercase().starts_with("week")) {
        n *= 7;
    }
    let mut out = template.replace("{n}", &n.to_string());
    if out.contains("{ref}") {
        out = out.replace("{ref}", &name_for_id(ctx.previous_id.as_deref()?));
    }
    if out.contains("{decl_minus_n}") {
        out = out.replace("{decl_minus_n}", &ctx.declared_day?.checked_sub(n)?.to_string());
    }
    Some(out)
}

pub fn extract(text: &str, rules: &RuleSet) -> TsvTable {
    let mut table = TsvTable::default();
    let mut ctx = Context::default();
    for (i, sentence) in split_sentences(text).into_iter().enumerate() {
        let id = (i + 1).to_string();
        let mut rows = extract_sentence(&id, &sentence, rules, &ctx);
        let top = &rows[0];
        if top.modality == RowModality::Declaration {
            if let Some(day) = declared_day(&top.time) {
                ctx.declared_day = Some(day);
            }
        }
        let object = rows.iter().rev().find(|r| !r.object.is_empty()).map(|r| r.object.clone()).unwrap_or_default();
        if top.modality != RowModality::Declaration && !object.is_empty() {
            ctx.previous_object = object;
        }
        ctx.previous_id = Some(id);
        table.rows.append(&mut rows);
    }
    table
}

fn declared_day(time: &str) -> Option<u32> {
    let inner = time.strip_prefix("in [")?.strip_suffix(']')?;
    let (a, b) = inner.split_once(',')?;
    (a == b).then(|| a.parse().ok()).flatten()
}

fn extract_sentence(id: &str, sentence: &str, rules: &RuleSet, ctx: &Context) -> Vec<ClauseRow> {
    let mut row = ClauseRow::new(id);
    row.text = sentence.to_string();
    let mut body = sentence.trim_end_matches(['.', '!', '?']).trim().to_string();

    if let Some(caps) = CONDITION.captures(&body) {
        if let Some(prev) = &ctx.previous_id {
            let name = name_for_id(prev);
            row.condition = if NEGATION.is_match(&caps[1]) { format!("violated({name})") } else { format!("done({name})") };
        }
        body = body[caps.get(0).unwrap().end()..].to_string();
    }

    let (body, time) = apply_temporal(rules, &body, ctx);
    row.time = time;

    let Some((marker, m)) = rules.markers.iter().find_map(|r| r.regex.find(&body).map(|m| (r, m))) else {
        return vec![row];
    };
    row.modality = marker.modality;
    let subject = &body[..m.start()];
    let predicate = &body[m.end()..];

    if row.modality == RowModality::Declaration {
        let subject: Vec<String> = words(subject.rsplit(',').next().unwrap_or(""))
            .into_iter()
            .filter(|w| !DETERMINERS.contains(&w.as_str()))
            .collect();
        let mut all = subject;
        all.extend(action_words(predicate, ""));
        row.object = all.join(" ");
        return vec![row];
    }

    row.agent = head_noun(subject);
    for rule in &rules.connectives {
        let Some(caps) = rule.regex.captures(predicate) else { continue };
        let shared = &predicate[..caps.get(0).unwrap().start()];
        row.connective = rule.connective;
        let mut out = vec![row.clone()];
        out[0].time.clear();
        for (k, part) in [&caps["x"], &caps["y"]].into_iter().enumerate() {
            let mut sub = ClauseRow::new(format!("{id}.{}", k + 1));
            sub.agent = row.agent.clone();
            sub.modality = row.modality;
            sub.time = row.time.clone();
            let ws = action_words(&format!("{shared} {part}"), &ctx.previous_object);
            set_action(&mut sub, &ws);
            out.push(sub);
        }
        return out;
    }
    let ws = action_words(predicate, &ctx.previous_object);
    set_action(&mut row, &ws);
    vec![row]
}

fn set_action(row: &mut ClauseRow, ws: &[String]) {
    if let Some((verb, object)) = ws.split_first() {
        row.verb = verb.clone();
        row.object = object.join(" ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(sentence: &str) -> Vec<ClauseRow> {
        extract(sentence, RuleSet::english()).rows
    }

    #[test]
    fn sentence_splitting() {
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("Pay. Then leave."), ["Pay.", "Then leave."]);
        assert_eq!(split_sentences("Bring e.g. a pen. Done!  Really?"), ["Bring e.g. a pen.", "Done!", "Really?"]);
        assert_eq!(split_sentences("Version 1.5 is out"), ["Version 1.5 is out"]);
    }

    #[test]
    fn registration_sentence() {
        let rows = one("Students need to register for the course before the registration deadline, one week after the course has started.");
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.agent.as_str(), r.modality, r.verb.as_str(), r.object.as_str(), r.time.as_str()),
            ("student", RowModality::Norm(crate::contract::Modality::Obligation), "register", "for course", "< 7"));
    }

    #[test]
    fn conjunction_becomes_sub_rows() {
        let rows = one("To pass the course, a student must pass both the assignment and the exam.");
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].connective, RowConnective::And);
        assert_eq!(rows[0].agent, "student");
        assert_eq!((rows[1].id.as_str(), rows[1].verb.as_str(), rows[1].object.as_str()), ("1.1", "pass", "assignment"));
        assert_eq!((rows[2].id.as_str(), rows[2].verb.as_str(), rows[2].object.as_str()), ("1.2", "pass", "exam"));
    }

    #[test]
    fn declaration_with_a_day() {
        let r = &one("The exam will be held on day 60.")[0];
        assert_eq!(r.modality, RowModality::Declaration);
        assert_eq!(r.agent, "");
        assert_eq!(r.object, "exam held");
        assert_eq!(r.time, "in [60,60]");
    }

    #[test]
    fn unknown_sentences_keep_empty_cells() {
        let r = &one("Hello there.")[0];
        assert_eq!(r.modality, RowModality::Unknown);
        assert_eq!(r.text, "Hello there.");
        assert!(r.agent.is_empty() && r.verb.is_empty());
    }

    #[test]
    fn prohibition_beats_obligation() {
        let r = &one("Visitors must not smoke by day 3.")[0];
        assert_eq!(r.modality, RowModality::Norm(crate::contract::Modality::Prohibition));
        assert_eq!((r.agent.as_str(), r.verb.as_str(), r.time.as_str()), ("visitor", "smoke", "<= 3"));
    }

    #[test]
    fn custom_rules() {
        let rules = RuleSet::parse("ought to\tO\nwithin {N} {UNIT}\tTIME < {n}\n").unwrap();
        let r = &extract("Tenants ought to pay rent within 2 weeks.", &rules).rows[0];
        assert_eq!((r.agent.as_str(), r.verb.as_str(), r.object.as_str(), r.time.as_str()), ("tenant", "pay", "rent", "< 14"));
        assert!(RuleSet::parse("oops\tQ\n").is_err());
        assert!(RuleSet::parse("no tab\n").is_err());
        assert!(RuleSet::parse("both {X}\tAND\nmust\tO\n").is_err());
        assert!(RuleSet::parse("").is_err());
    }
}
