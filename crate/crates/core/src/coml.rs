//! COML, the XML persistence format for contract models.
//!
//! ```xml
//! <?xml version="1.0" encoding="UTF-8"?>
//! <contract title="Course rules">
//!   <clause name="c1" kind="atomic">
//!     <agent>student</agent>
//!     <modality>O</modality>
//!     <action verb="register" object="for course"/>
//!     <time high="7" strict="true"/>
//!   </clause>
//!   <reparations>
//!     ...
//!   </reparations>
//! </contract>
//! ```

use std::collections::HashSet;

use thiserror::Error;

use crate::contract::{
    validate, Action, Agent, Atomic, Clause, ClauseBody, Composite, Connective, ContractModel, Declaration,
    Diagnostic, Guard, Modality, TimeExpr,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComlError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvariantViolation(Vec<Diagnostic>),
}

impl ComlError {
    pub fn code(&self) -> &'static str {
        match self {
            ComlError::XmlMalformed(_) => "XML_MALFORMED",
            ComlError::SchemaViolation { .. } => "SCHEMA_VIOLATION",
            ComlError::InvariantViolation(_) => "INVARIANT_VIOLATION",
        }
    }

    pub fn location(&self) -> Option<String> {
        match self {
            ComlError::SchemaViolation { path, .. } => Some(path.clone()),
            ComlError::InvariantViolation(d) => d.first().map(|d| d.clause.clone()),
            ComlError::XmlMalformed(_) => None,
        }
    }
}

// ---------------------------------------------------------------- emit

pub(crate) fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }
}

/// Serializes a model. Output is deterministic: fixed element and attribute
/// order, two-space indentation.
pub fn emit_coml(model: &ContractModel) -> Result<String, ComlError> {
    let diags = validate(model);
    if !diags.is_empty() {
        return Err(ComlError::InvariantViolation(diags));
    }
    let mut w = Writer { out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n") };
    let head = format!("<contract title=\"{}\"", escape_xml(&model.title));
    if model.clauses.is_empty() && model.reparations.is_empty() {
        w.line(0, &format!("{head}/>"));
        return Ok(w.out);
    }
    w.line(0, &format!("{head}>"));
    for c in &model.clauses {
        write_clause(&mut w, 1, c);
    }
    if !model.reparations.is_empty() {
        w.line(1, "<reparations>");
        for c in &model.reparations {
            write_clause(&mut w, 2, c);
        }
        w.line(1, "</reparations>");
    }
    w.line(0, "</contract>");
    Ok(w.out)
}

fn write_time(w: &mut Writer, depth: usize, t: &TimeExpr) {
    let mut s = String::from("<time");
    if let Some(l) = t.low {
        s.push_str(&format!(" low=\"{l}\""));
    }
    if let Some(h) = t.high {
        s.push_str(&format!(" high=\"{h}\" strict=\"{}\"", t.strict));
    }
    if let Some(r) = &t.reference {
        s.push_str(&format!(" ref=\"{}\"", escape_xml(r)));
    }
    s.push_str("/>");
    w.line(depth, &s);
}

fn write_guard_node(w: &mut Writer, depth: usize, g: &Guard) {
    match g {
        Guard::Done(n) => w.line(depth, &format!("<done ref=\"{n}\"/>")),
        Guard::Violated(n) => w.line(depth, &format!("<violated ref=\"{n}\"/>")),
        Guard::Not(inner) => {
            w.line(depth, "<not>");
            write_guard_node(w, depth + 1, inner);
            w.line(depth, "</not>");
        }
        Guard::And(a, b) | Guard::Or(a, b) => {
            let tag = if matches!(g, Guard::And(..)) { "and" } else { "or" };
            w.line(depth, &format!("<{tag}>"));
            write_guard_node(w, depth + 1, a);
            write_guard_node(w, depth + 1, b);
            w.line(depth, &format!("</{tag}>"));
        }
    }
}

fn write_guard(w: &mut Writer, depth: usize, g: &Option<Guard>) {
    if let Some(g) = g {
        w.line(depth, "<guard>");
        write_guard_node(w, depth + 1, g);
        w.line(depth, "</guard>");
    }
}

fn write_reparation(w: &mut Writer, depth: usize, r: &Option<String>) {
    if let Some(r) = r {
        w.line(depth, &format!("<reparation ref=\"{r}\"/>"));
    }
}

fn connective_name(c: Connective) -> &'static str {
    match c {
        Connective::Conjunction => "and",
        Connective::Choice => "or",
        Connective::Sequence => "seq",
    }
}

fn write_clause(w: &mut Writer, depth: usize, c: &Clause) {
    let d = depth + 1;
    match &c.body {
        ClauseBody::Atomic(a) => {
            w.line(depth, &format!("<clause name=\"{}\" kind=\"atomic\">", c.name));
            w.line(d, &format!("<agent>{}</agent>", a.agent));
            w.line(d, &format!("<modality>{}</modality>", a.modality.code()));
            w.line(
                d,
                &format!("<action verb=\"{}\" object=\"{}\"/>", a.action.verb(), escape_xml(a.action.object())),
            );
            if let Some(t) = &a.time {
                write_time(w, d, t);
            }
            write_guard(w, d, &a.guard);
            write_reparation(w, d, &a.reparation);
        }
        ClauseBody::Declaration(decl) => {
            w.line(depth, &format!("<clause name=\"{}\" kind=\"declaration\">", c.name));
            w.line(d, &format!("<text>{}</text>", escape_xml(&decl.text)));
            if let Some(t) = &decl.time {
                write_time(w, d, t);
            }
        }
        ClauseBody::Composite(comp) => {
            w.line(
                depth,
                &format!("<clause name=\"{}\" kind=\"composite\" connective=\"{}\">", c.name, connective_name(comp.connective)),
            );
            write_guard(w, d, &comp.guard);
            for child in &comp.children {
                write_clause(w, d, child);
            }
            write_reparation(w, d, &comp.reparation);
        }
    }
    w.line(depth, "</clause>");
}

// ---------------------------------------------------------------- parse

type Node<'a, 'i> = roxmltree::Node<'a, 'i>;

fn schema<T>(path: &str, message: impl Into<String>) -> Result<T, ComlError> {
    Err(ComlError::SchemaViolation { path: path.to_string(), message: message.into() })
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|n| n.is_element())
}

fn check_no_text(node: Node<'_, '_>, path: &str) -> Result<(), ComlError> {
    if node.children().any(|n| n.is_text() && !n.text().unwrap_or("").trim().is_empty()) {
        return schema(path, format!("unexpected text inside <{}>", node.tag_name().name()));
    }
    Ok(())
}

fn attr<'a>(node: Node<'a, '_>, name: &str, path: &str) -> Result<&'a str, ComlError> {
    match node.attribute(name) {
        Some(v) => Ok(v),
        None => schema(path, format!("<{}> is missing attribute `{name}`", node.tag_name().name())),
    }
}

fn num_attr(node: Node<'_, '_>, name: &str, path: &str) -> Result<Option<u32>, ComlError> {
    match node.attribute(name) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .or_else(|_| schema(path, format!("attribute `{name}` must be a natural number, got `{v}`"))),
    }
}

fn text_of(node: Node<'_, '_>) -> String {
    node.children().filter(|n| n.is_text()).map(|n| n.text().unwrap_or("")).collect()
}

/// Parses a COML document. Unresolved references are reported as schema
/// violations; other broken invariants as [`ComlError::InvariantViolation`].
pub fn parse_coml(xml: &str) -> Result<ContractModel, ComlError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| ComlError::XmlMalformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "contract" {
        return schema("/", format!("root element must be <contract>, found <{}>", root.tag_name().name()));
    }
    let path = "/contract";
    check_no_text(root, path)?;
    let mut model = ContractModel::new(root.attribute("title").unwrap_or(""));
    let mut seen_reparations = false;
    for (i, child) in elements(root).enumerate() {
        let p = format!("{path}/*[{}]", i + 1);
        match child.tag_name().name() {
            "clause" if !seen_reparations => model.clauses.push(parse_clause(child, &p)?),
            "reparations" if !seen_reparations => {
                seen_reparations = true;
                check_no_text(child, &p)?;
                for (j, rep) in elements(child).enumerate() {
                    let rp = format!("{p}/clause[{}]", j + 1);
                    if rep.tag_name().name() != "clause" {
                        return schema(&rp, "only <clause> may appear inside <reparations>");
                    }
                    model.reparations.push(parse_clause(rep, &rp)?);
                }
            }
            other => return schema(&p, format!("unexpected element <{other}>")),
        }
    }
    check_references(&model)?;
    let diags = validate(&model);
    if !diags.is_empty() {
        return Err(ComlError::InvariantViolation(diags));
    }
    Ok(model)
}

fn check_references(model: &ContractModel) -> Result<(), ComlError> {
    let all = model.all_clauses();
    let names: HashSet<&str> = all.iter().map(|r| r.clause.name.as_str()).collect();
    let reps: HashSet<&str> = model.reparations.iter().map(|c| c.name.as_str()).collect();
    for r in &all {
        let c = r.clause;
        let p = format!("clause[@name='{}']", c.name);
        if let Some(rep) = c.reparation() {
            if !reps.contains(rep) {
                return schema(&format!("{p}/reparation"), format!("reparation `{rep}` does not name a reparation clause"));
            }
        }
        if let Some(g) = c.guard() {
            if let Some(missing) = g.references().into_iter().find(|n| !names.contains(n)) {
                return schema(&format!("{p}/guard"), format!("guard refers to unknown clause `{missing}`"));
            }
        }
        if let Some(TimeExpr { reference: Some(t), .. }) = c.time() {
            if !names.contains(t.as_str()) {
                return schema(&format!("{p}/time"), format!("time refers to unknown clause `{t}`"));
            }
        }
    }
    Ok(())
}

fn parse_time_el(node: Node<'_, '_>, path: &str) -> Result<TimeExpr, ComlError> {
    let low = num_attr(node, "low", path)?;
    let high = num_attr(node, "high", path)?;
    let strict = match node.attribute("strict") {
        None | Some("false") => false,
        Some("true") => true,
        Some(v) => return schema(path, format!("attribute `strict` must be true or false, got `{v}`")),
    };
    Ok(TimeExpr { low, high, strict, reference: node.attribute("ref").map(str::to_string) })
}

fn parse_guard_el(node: Node<'_, '_>, path: &str) -> Result<Guard, ComlError> {
    let kids: Vec<_> = elements(node).collect();
    let tag = node.tag_name().name();
    match tag {
        "done" => Ok(Guard::Done(attr(node, "ref", path)?.to_string())),
        "violated" => Ok(Guard::Violated(attr(node, "ref", path)?.to_string())),
        "not" => match kids.as_slice() {
            [inner] => Ok(Guard::not(parse_guard_el(*inner, &format!("{path}/*[1]"))?)),
            _ => schema(path, "<not> takes exactly one operand"),
        },
        "and" | "or" => {
            if kids.len() < 2 {
                return schema(path, format!("<{tag}> takes at least two operands"));
            }
            let mut it = kids.iter().enumerate().map(|(i, k)| parse_guard_el(*k, &format!("{path}/*[{}]", i + 1)));
            let mut acc = it.next().unwrap()?;
            for g in it {
                acc = if tag == "and" { Guard::and(acc, g?) } else { Guard::or(acc, g?) };
            }
            Ok(acc)
        }
        other => schema(path, format!("unexpected guard element <{other}>")),
    }
}

fn parse_guard_wrapper(node: Node<'_, '_>, path: &str) -> Result<Guard, ComlError> {
    check_no_text(node, path)?;
    let kids: Vec<_> = elements(node).collect();
    match kids.as_slice() {
        [g] => parse_guard_el(*g, &format!("{path}/*[1]")),
        _ => schema(path, "<guard> must contain exactly one condition"),
    }
}

fn parse_clause(node: Node<'_, '_>, path: &str) -> Result<Clause, ComlError> {
    check_no_text(node, path)?;
    let name = attr(node, "name", path)?.to_string();
    let kind = attr(node, "kind", path)?;
    let mut agent = None;
    let mut modality = None;
    let mut action = None;
    let mut time = None;
    let mut guard = None;
    let mut reparation = None;
    let mut text = None;
    let mut children = Vec::new();

    for (i, el) in elements(node).enumerate() {
        let p = format!("{path}/*[{}]", i + 1);
        let tag = el.tag_name().name();
        let allowed = match kind {
            "atomic" => matches!(tag, "agent" | "modality" | "action" | "time" | "guard" | "reparation"),
            "declaration" => matches!(tag, "text" | "time"),
            "composite" => matches!(tag, "guard" | "clause" | "reparation"),
            other => return schema(path, format!("unknown clause kind `{other}`")),
        };
        if !allowed {
            return schema(&p, format!("<{tag}> is not allowed in a {kind} clause"));
        }
        let dup = |present: bool| if present { schema(&p, format!("duplicate <{tag}>")) } else { Ok(()) };
        match tag {
            "agent" => {
                dup(agent.is_some())?;
                let raw = text_of(el);
                agent = Some(Agent::new(raw.trim()).or_else(|e| schema(&p, e.to_string()))?);
            }
            "modality" => {
                dup(modality.is_some())?;
                let raw = text_of(el);
                modality = Some(
                    Modality::from_code(raw.trim()).map_or_else(|| schema(&p, format!("unknown modality `{raw}`")), Ok)?,
                );
            }
            "action" => {
                dup(action.is_some())?;
                let verb = attr(el, "verb", &p)?;
                let object = el.attribute("object").unwrap_or("");
                action = Some(Action::new(verb, object).or_else(|e| schema(&p, e.to_string()))?);
            }
            "time" => {
                dup(time.is_some())?;
                time = Some(parse_time_el(el, &p)?);
            }
            "guard" => {
                dup(guard.is_some())?;
                guard = Some(parse_guard_wrapper(el, &p)?);
            }
            "reparation" => {
                dup(reparation.is_some())?;
                reparation = Some(attr(el, "ref", &p)?.to_string());
            }
            "text" => {
                dup(text.is_some())?;
                text = Some(text_of(el));
            }
            "clause" => children.push(parse_clause(el, &p)?),
            _ => unreachable!(),
        }
    }

    let body = match kind {
        "atomic" => ClauseBody::Atomic(Atomic {
            agent: agent.map_or_else(|| schema(path, "atomic clause needs <agent>"), Ok)?,
            modality: modality.map_or_else(|| schema(path, "atomic clause needs <modality>"), Ok)?,
            action: action.map_or_else(|| schema(path, "atomic clause needs <action>"), Ok)?,
            time,
            guard,
            reparation,
        }),
        "declaration" => ClauseBody::Declaration(Declaration {
            text: text.map_or_else(|| schema(path, "declaration needs <text>"), Ok)?,
            time,
        }),
        _ => {
            let connective = match attr(node, "connective", path)? {
                "and" => Connective::Conjunction,
                "or" => Connective::Choice,
                "seq" => Connective::Sequence,
                other => return schema(path, format!("unknown connective `{other}`")),
            };
            ClauseBody::Composite(Composite { connective, children, guard, reparation })
        }
    };
    Ok(Clause { name, body })
}
