//! The tabular clause format produced by extraction and edited by hand, and
//! its conversion to and from [`ContractModel`].
//!
//! One row per clause. Refinements use dotted ids: rows `2.1` and `2.2` are
//! the children of row `2`, joined by row `2`'s connective.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::contract::{
    autoname, is_clause_name, validate, Action, Agent, Atomic, Clause, ClauseBody, Composite, Connective,
    ContractModel, Declaration, Diagnostic, Guard, Modality,
};
use crate::notation::{parse_guard, parse_time, print_guard, print_time};

pub const COLUMNS: [&str; 9] = ["id", "text", "agent", "modality", "verb", "object", "connective", "condition", "time"];

/// Modality column: a deontic code, `D` for declarations, or empty when
/// extraction could not decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RowModality {
    #[default]
    Unknown,
    Norm(Modality),
    Declaration,
}

impl RowModality {
    pub fn as_str(self) -> &'static str {
        match self {
            RowModality::Unknown => "",
            RowModality::Norm(Modality::Obligation) => "O",
            RowModality::Norm(Modality::Permission) => "P",
            RowModality::Norm(Modality::Prohibition) => "F",
            RowModality::Declaration => "D",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "" => Some(RowModality::Unknown),
            "D" => Some(RowModality::Declaration),
            other => Modality::from_code(other).map(RowModality::Norm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RowConnective {
    #[default]
    None,
    And,
    Or,
    Seq,
}

impl RowConnective {
    pub fn as_str(self) -> &'static str {
        match self {
            RowConnective::None => "",
            RowConnective::And => "AND",
            RowConnective::Or => "OR",
            RowConnective::Seq => "SEQ",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "" => Some(RowConnective::None),
            "AND" => Some(RowConnective::And),
            "OR" => Some(RowConnective::Or),
            "SEQ" => Some(RowConnective::Seq),
            _ => None,
        }
    }

    fn to_connective(self) -> Connective {
        match self {
            RowConnective::None | RowConnective::And => Connective::Conjunction,
            RowConnective::Or => Connective::Choice,
            RowConnective::Seq => Connective::Sequence,
        }
    }

    fn from_connective(c: Connective) -> Self {
        match c {
            Connective::Conjunction => RowConnective::And,
            Connective::Choice => RowConnective::Or,
            Connective::Sequence => RowConnective::Seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClauseRow {
    pub id: String,
    pub text: String,
    pub agent: String,
    pub modality: RowModality,
    pub verb: String,
    pub object: String,
    pub connective: RowConnective,
    pub condition: String,
    pub time: String,
}

impl ClauseRow {
    pub fn new(id: impl Into<String>) -> Self {
        ClauseRow { id: id.into(), ..Default::default() }
    }

    fn cells(&self) -> [&str; 9] {
        [
            &self.id,
            &self.text,
            &self.agent,
            self.modality.as_str(),
            &self.verb,
            &self.object,
            self.connective.as_str(),
            &self.condition,
            &self.time,
        ]
    }

    /// The id of the row this one refines, if it is a sub-row.
    pub fn parent_id(&self) -> Option<&str> {
        self.id.rsplit_once('.').map(|(p, _)| p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TsvTable {
    pub rows: Vec<ClauseRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TsvError {
    #[error("header must be `{}`", COLUMNS.join("\\t"))]
    BadHeader,
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("line {line}: duplicate row id `{id}`")]
    DuplicateId { line: usize, id: String },
}

impl TsvError {
    pub fn code(&self) -> &'static str {
        match self {
            TsvError::BadHeader => "BAD_HEADER",
            TsvError::BadRow { .. } => "BAD_ROW",
            TsvError::DuplicateId { .. } => "DUPLICATE_ID",
        }
    }

    pub fn location(&self) -> Option<String> {
        match self {
            TsvError::BadHeader => Some("line 1".into()),
            TsvError::BadRow { line, .. } | TsvError::DuplicateId { line, .. } => Some(format!("line {line}")),
        }
    }
}

fn escape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_cell(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("dangling `\\` at end of cell".into()),
        }
    }
    Ok(out)
}

pub fn emit_tsv(table: &TsvTable) -> String {
    let mut out = COLUMNS.join("\t");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.cells().iter().map(|c| escape_cell(c)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn parse_tsv(text: &str) -> Result<TsvTable, TsvError> {
    let mut lines = text.split('\n').enumerate().peekable();
    let header = lines.next().map(|(_, l)| l.strip_suffix('\r').unwrap_or(l)).unwrap_or("");
    if header.split('\t').ne(COLUMNS) {
        return Err(TsvError::BadHeader);
    }
    let mut rows = Vec::new();
    let mut ids = HashSet::new();
    while let Some((i, raw)) = lines.next() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.is_empty() && lines.peek().is_none() {
            break;
        }
        let bad = |message: String| TsvError::BadRow { line, message };
        let cells: Vec<String> = raw.split('\t').map(unescape_cell).collect::<Result<_, _>>().map_err(bad)?;
        if cells.len() != COLUMNS.len() {
            return Err(bad(format!("expected {} cells, found {}", COLUMNS.len(), cells.len())));
        }
        let [id, text, agent, modality, verb, object, connective, condition, time]: [String; 9] =
            cells.try_into().expect("length checked");
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(bad(format!("row id `{id}` must be a non-empty token")));
        }
        let modality = RowModality::parse(&modality).ok_or_else(|| bad(format!("unknown modality `{modality}`")))?;
        let connective =
            RowConnective::parse(&connective).ok_or_else(|| bad(format!("unknown connective `{connective}`")))?;
        if !ids.insert(id.clone()) {
            return Err(TsvError::DuplicateId { line, id });
        }
        rows.push(ClauseRow { id, text, agent, modality, verb, object, connective, condition, time });
    }
    Ok(TsvTable { rows })
}

// ---------------------------------------------------------------- conversion

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvertError {
    #[error("row {row}: cannot parse condition: {message}")]
    ParseCondition { row: String, message: String },
    #[error("row {row}: cannot parse time: {message}")]
    ParseTime { row: String, message: String },
    #[error("row {row}: sub-row has no parent row")]
    OrphanSubrow { row: String },
    #[error("row {row}: {message}")]
    BadSubrow { row: String, message: String },
    #[error("row {row}: {message}")]
    BadCell { row: String, message: String },
    #[error("converted model is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Diagnostic>),
}

impl ConvertError {
    pub fn code(&self) -> &'static str {
        match self {
            ConvertError::ParseCondition { .. } => "PARSE_CONDITION",
            ConvertError::ParseTime { .. } => "PARSE_TIME",
            ConvertError::OrphanSubrow { .. } => "ORPHAN_SUBROW",
            ConvertError::BadSubrow { .. } => "BAD_SUBROW",
            ConvertError::BadCell { .. } => "BAD_CELL",
            ConvertError::InvalidModel(_) => "INVARIANT_VIOLATION",
        }
    }

    pub fn location(&self) -> Option<String> {
        match self {
            ConvertError::ParseCondition { row, .. }
            | ConvertError::ParseTime { row, .. }
            | ConvertError::OrphanSubrow { row }
            | ConvertError::BadSubrow { row, .. }
            | ConvertError::BadCell { row, .. } => Some(format!("row {row}")),
            ConvertError::InvalidModel(d) => d.first().map(|d| d.clause.clone()),
        }
    }
}

/// Clause name for a row id: numeric ids get a `c` prefix (`2.1` -> `c2_1`);
/// dots always become underscores.
pub fn name_for_id(id: &str) -> String {
    let flat = id.replace('.', "_");
    if flat.starts_with(|c: char| c.is_ascii_digit()) {
        format!("c{flat}")
    } else {
        flat
    }
}

static ELSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bELSE\b").unwrap());

/// Splits a condition cell into its guard and `ELSE <name>` reparation.
pub fn parse_condition(cell: &str) -> Result<(Option<Guard>, Option<String>), String> {
    let (guard_text, reparation) = match ELSE.find(cell) {
        Some(m) => {
            let name = cell[m.end()..].trim();
            if !is_clause_name(name) {
                return Err(format!("`ELSE` must be followed by one clause name, found `{name}`"));
            }
            (&cell[..m.start()], Some(name.to_string()))
        }
        None => (cell, None),
    };
    let guard = if guard_text.trim().is_empty() {
        None
    } else {
        Some(parse_guard(guard_text).map_err(|e| e.to_string())?)
    };
    Ok((guard, reparation))
}

pub fn print_condition(guard: Option<&Guard>, reparation: Option<&str>) -> String {
    match (guard, reparation) {
        (None, None) => String::new(),
        (Some(g), None) => print_guard(g),
        (None, Some(r)) => format!("ELSE {r}"),
        (Some(g), Some(r)) => format!("{} ELSE {r}", print_guard(g)),
    }
}

/// Builds a model from a (post-edited) table. Clause names derive from row
/// ids, so `ELSE c5` refers to row `5`. Rows referenced by `ELSE` become
/// reparations.
pub fn rows_to_model(table: &TsvTable) -> Result<ContractModel, ConvertError> {
    let mut children: HashMap<&str, Vec<&ClauseRow>> = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut top = Vec::new();
    for row in &table.rows {
        if !seen.insert(&row.id) {
            return Err(ConvertError::BadCell { row: row.id.clone(), message: "duplicate row id".into() });
        }
        match row.parent_id() {
            None => top.push(row),
            Some(parent) => {
                if !seen.contains(parent) {
                    return Err(ConvertError::OrphanSubrow { row: row.id.clone() });
                }
                let siblings = children.entry(parent).or_default();
                let expected = siblings.len() + 1;
                let k = &row.id[parent.len() + 1..];
                if k != expected.to_string() {
                    return Err(ConvertError::BadSubrow {
                        row: row.id.clone(),
                        message: format!("expected sub-row {parent}.{expected}"),
                    });
                }
                siblings.push(row);
            }
        }
    }

    let mut clauses = Vec::new();
    for row in &top {
        clauses.push(build_clause(row, &children)?);
    }
    let referenced: HashSet<String> = clauses
        .iter()
        .flat_map(|c: &Clause| {
            let mut refs = Vec::new();
            collect_reparations(c, &mut refs);
            refs
        })
        .collect();
    let (reparations, clauses): (Vec<Clause>, Vec<Clause>) =
        clauses.into_iter().partition(|c| referenced.contains(&c.name));
    let model = ContractModel { title: String::new(), clauses, reparations };
    let model = autoname(&model).map_err(|e| ConvertError::BadCell { row: e.0.clone(), message: e.to_string() })?;
    let diags = validate(&model);
    if !diags.is_empty() {
        return Err(ConvertError::InvalidModel(diags));
    }
    Ok(model)
}

fn collect_reparations(c: &Clause, out: &mut Vec<String>) {
    if let Some(r) = c.reparation() {
        out.push(r.to_string());
    }
    for child in c.children() {
        collect_reparations(child, out);
    }
}

fn build_clause(row: &ClauseRow, children: &HashMap<&str, Vec<&ClauseRow>>) -> Result<Clause, ConvertError> {
    let id = row.id.clone();
    let name = name_for_id(&row.id);
    if !is_clause_name(&name) {
        return Err(ConvertError::BadCell { row: id, message: format!("row id does not give a valid clause name (`{name}`)") });
    }
    let (guard, reparation) =
        parse_condition(&row.condition).map_err(|message| ConvertError::ParseCondition { row: id.clone(), message })?;
    let time = if row.time.trim().is_empty() {
        None
    } else {
        Some(parse_time(&row.time).map_err(|e| ConvertError::ParseTime { row: id.clone(), message: e.to_string() })?)
    };
    let bad = |message: &str| ConvertError::BadCell { row: id.clone(), message: message.to_string() };

    if let Some(kids) = children.get(row.id.as_str()) {
        if time.is_some() {
            return Err(ConvertError::ParseTime { row: id, message: "a refined clause cannot carry a time window".into() });
        }
        let children = kids.iter().map(|k| build_clause(k, children)).collect::<Result<Vec<_>, _>>()?;
        return Ok(Clause {
            name,
            body: ClauseBody::Composite(Composite { connective: row.connective.to_connective(), children, guard, reparation }),
        });
    }
    if row.connective != RowConnective::None {
        return Err(bad("connective set but the row has no sub-rows"));
    }
    let body = match row.modality {
        RowModality::Unknown => return Err(bad("modality is empty (post-edit the row)")),
        RowModality::Declaration => {
            if guard.is_some() || reparation.is_some() {
                return Err(ConvertError::ParseCondition { row: id, message: "declarations take no condition".into() });
            }
            let parts: Vec<&str> =
                [&row.agent, &row.verb, &row.object].iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
            let text = if parts.is_empty() { row.text.trim().to_string() } else { parts.join(" ") };
            ClauseBody::Declaration(Declaration { text, time })
        }
        RowModality::Norm(modality) => {
            let agent = Agent::normalize(&row.agent).map_err(|e| bad(&e.to_string()))?;
            let phrase = format!("{} {}", row.verb, row.object);
            let action = Action::from_phrase(&phrase).map_err(|e| bad(&e.to_string()))?;
            ClauseBody::Atomic(Atomic { agent, modality, action, time, guard, reparation })
        }
    };
    Ok(Clause { name, body })
}

/// Re-tabulates a model for editing. When clause names follow the
/// `c<id>` scheme (`c2`, `c2_1`) the ids are kept; otherwise rows are
/// numbered by position and references are renamed to match.
pub fn model_to_rows(model: &ContractModel) -> TsvTable {
    let roots: Vec<&Clause> = model.clauses.iter().chain(model.reparations.iter()).collect();
    let ids = preserved_ids(&roots).unwrap_or_else(|| positional_ids(&roots));
    let map: HashMap<String, String> = ids.iter().map(|(name, id)| (name.clone(), name_for_id(id))).collect();
    let mut renamed = model.clone();
    renamed.rename(&map);
    let mut table = TsvTable::default();
    let reverse: HashMap<String, String> = ids.into_iter().map(|(name, id)| (map[&name].clone(), id)).collect();
    for c in renamed.clauses.iter().chain(renamed.reparations.iter()) {
        push_rows(c, &reverse, &mut table.rows);
    }
    table
}

fn preserved_ids(roots: &[&Clause]) -> Option<Vec<(String, String)>> {
    static TOP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^c([0-9]+)$").unwrap());
    fn walk(c: &Clause, id: String, out: &mut Vec<(String, String)>) -> Option<()> {
        for (i, child) in c.children().iter().enumerate() {
            if child.name != format!("{}_{}", c.name, i + 1) {
                return None;
            }
            walk(child, format!("{id}.{}", i + 1), out)?;
        }
        out.push((c.name.clone(), id));
        Some(())
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for root in roots {
        let num = TOP.captures(&root.name)?.get(1)?.as_str().to_string();
        if num.starts_with('0') || !seen.insert(num.clone()) {
            return None;
        }
        walk(root, num, &mut out)?;
    }
    Some(out)
}

fn positional_ids(roots: &[&Clause]) -> Vec<(String, String)> {
    fn walk(c: &Clause, id: String, out: &mut Vec<(String, String)>) {
        for (i, child) in c.children().iter().enumerate() {
            walk(child, format!("{id}.{}", i + 1), out);
        }
        out.push((c.name.clone(), id));
    }
    let mut out = Vec::new();
    for (k, root) in roots.iter().enumerate() {
        walk(root, (k + 1).to_string(), &mut out);
    }
    out
}

fn push_rows(c: &Clause, ids: &HashMap<String, String>, rows: &mut Vec<ClauseRow>) {
    let mut row = ClauseRow::new(ids[&c.name].clone());
    match &c.body {
        ClauseBody::Atomic(a) => {
            row.agent = a.agent.to_string();
            row.modality = RowModality::Norm(a.modality);
            row.verb = a.action.verb().to_string();
            row.object = a.action.object().to_string();
            row.condition = print_condition(a.guard.as_ref(), a.reparation.as_deref());
            row.time = a.time.as_ref().map(print_time).unwrap_or_default();
            rows.push(row);
        }
        ClauseBody::Declaration(d) => {
            row.modality = RowModality::Declaration;
            row.object = d.text.clone();
            row.time = d.time.as_ref().map(print_time).unwrap_or_default();
            rows.push(row);
        }
        ClauseBody::Composite(comp) => {
            row.connective = RowConnective::from_connective(comp.connective);
            row.condition = print_condition(comp.guard.as_ref(), comp.reparation.as_deref());
            rows.push(row);
            for child in &comp.children {
                push_rows(child, ids, rows);
            }
        }
    }
}

impl fmt::Display for TsvTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_tsv(self))
    }
}
