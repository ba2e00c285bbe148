//! The contract formalism: agents performing actions under deontic
//! modalities, refined by conjunction, choice and sequence, with guards,
//! timing windows and reparations.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z][a-z0-9_]*$").unwrap());
static OBJECT_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-z0-9][a-z0-9_]*$").unwrap());
static CLAUSE_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*$").unwrap());

/// Rejected domain value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("invalid agent `{0}` (expected [a-z][a-z0-9_]*)")]
    Agent(String),
    #[error("invalid verb `{0}` (expected [a-z][a-z0-9_]*)")]
    Verb(String),
    #[error("invalid object `{0}` (expected lowercase words)")]
    Object(String),
}

/// The party a clause applies to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Agent(String);

impl Agent {
    pub fn new(name: impl Into<String>) -> Result<Self, TokenError> {
        let name = name.into();
        if TOKEN.is_match(&name) {
            Ok(Agent(name))
        } else {
            Err(TokenError::Agent(name))
        }
    }

    /// Lowercases and joins words with underscores before validating.
    pub fn normalize(raw: &str) -> Result<Self, TokenError> {
        let joined = raw
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join("_");
        Agent::new(joined)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Agent {
    type Error = TokenError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Agent::new(value)
    }
}

impl From<Agent> for String {
    fn from(a: Agent) -> String {
        a.0
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A verb with an optional object phrase, e.g. `register` + `for course`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action {
    verb: String,
    object: String,
}

impl Action {
    pub fn new(verb: impl Into<String>, object: impl AsRef<str>) -> Result<Self, TokenError> {
        let verb = verb.into();
        if !TOKEN.is_match(&verb) {
            return Err(TokenError::Verb(verb));
        }
        let words: Vec<&str> = object.as_ref().split_whitespace().collect();
        if let Some(bad) = words.iter().find(|w| !OBJECT_WORD.is_match(w)) {
            return Err(TokenError::Object(bad.to_string()));
        }
        Ok(Action { verb, object: words.join(" ") })
    }

    /// Splits a free phrase: the first word is the verb, the rest the object.
    pub fn from_phrase(phrase: &str) -> Result<Self, TokenError> {
        let lower = phrase.to_lowercase();
        let mut words = lower.split_whitespace();
        let verb = words.next().unwrap_or_default().to_string();
        let rest: Vec<&str> = words.collect();
        Action::new(verb, rest.join(" "))
    }

    pub fn verb(&self) -> &str {
        &self.verb
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    /// `verb object`, single-space joined.
    pub fn label(&self) -> String {
        if self.object.is_empty() {
            self.verb.clone()
        } else {
            format!("{} {}", self.verb, self.object)
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Identifier of an (agent, action) pair, `agent_verb_object` with spaces
/// replaced by underscores. Used to index clocks and channels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionKey(String);

impl ActionKey {
    pub fn new(agent: &Agent, action: &Action) -> Self {
        ActionKey(format!("{}_{}", agent.as_str(), action.label().replace(' ', "_")))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Obligation,
    Permission,
    Prohibition,
}

impl Modality {
    /// Single-letter code: `O`, `P`, `F`.
    pub fn code(self) -> char {
        match self {
            Modality::Obligation => 'O',
            Modality::Permission => 'P',
            Modality::Prohibition => 'F',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "O" => Some(Modality::Obligation),
            "P" => Some(Modality::Permission),
            "F" => Some(Modality::Prohibition),
            _ => None,
        }
    }
}

/// A timing window. Absolute windows are measured on global time; relative
/// ones on the clock of `reference`, which starts when that clause is
/// activated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TimeExpr {
    pub low: Option<u32>,
    pub high: Option<u32>,
    /// Upper bound is exclusive (`t < high`). Only meaningful with `high`.
    pub strict: bool,
    pub reference: Option<String>,
}

impl TimeExpr {
    pub fn before(high: u32) -> Self {
        TimeExpr { high: Some(high), strict: true, ..Default::default() }
    }

    pub fn by(high: u32) -> Self {
        TimeExpr { high: Some(high), ..Default::default() }
    }

    pub fn from(low: u32) -> Self {
        TimeExpr { low: Some(low), ..Default::default() }
    }

    pub fn between(low: u32, high: u32) -> Self {
        TimeExpr { low: Some(low), high: Some(high), ..Default::default() }
    }

    pub fn relative_to(mut self, clause: impl Into<String>) -> Self {
        self.reference = Some(clause.into());
        self
    }

    pub fn is_relative(&self) -> bool {
        self.reference.is_some()
    }

    /// Largest constant mentioned.
    pub fn max_constant(&self) -> u32 {
        self.low.unwrap_or(0).max(self.high.unwrap_or(0))
    }
}

/// Boolean condition over the status of other clauses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    Done(String),
    Violated(String),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn done(name: impl Into<String>) -> Self {
        Guard::Done(name.into())
    }

    pub fn violated(name: impl Into<String>) -> Self {
        Guard::Violated(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Guard) -> Self {
        Guard::Not(Box::new(inner))
    }

    pub fn and(a: Guard, b: Guard) -> Self {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Self {
        Guard::Or(Box::new(a), Box::new(b))
    }

    /// Clause names mentioned, in left-to-right order (with repeats).
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Guard::Done(n) | Guard::Violated(n) => out.push(n),
            Guard::Not(g) => g.collect_refs(out),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
        }
    }

    pub fn rename(&mut self, map: &HashMap<String, String>) {
        match self {
            Guard::Done(n) | Guard::Violated(n) => {
                if let Some(new) = map.get(n) {
                    *n = new.clone();
                }
            }
            Guard::Not(g) => g.rename(map),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.rename(map);
                b.rename(map);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connective {
    Conjunction,
    Choice,
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atomic {
    pub agent: Agent,
    pub modality: Modality,
    pub action: Action,
    pub time: Option<TimeExpr>,
    pub guard: Option<Guard>,
    pub reparation: Option<String>,
}

impl Atomic {
    pub fn key(&self) -> ActionKey {
        ActionKey::new(&self.agent, &self.action)
    }
}

/// A non-normative scheduled fact such as "the exam is held on day 60".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub text: String,
    pub time: Option<TimeExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composite {
    pub connective: Connective,
    pub children: Vec<Clause>,
    pub guard: Option<Guard>,
    pub reparation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseBody {
    Atomic(Atomic),
    Declaration(Declaration),
    Composite(Composite),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub name: String,
    pub body: ClauseBody,
}

impl Clause {
    pub fn atomic(name: impl Into<String>, agent: Agent, modality: Modality, action: Action) -> Self {
        Clause {
            name: name.into(),
            body: ClauseBody::Atomic(Atomic {
                agent,
                modality,
                action,
                time: None,
                guard: None,
                reparation: None,
            }),
        }
    }

    pub fn declaration(name: impl Into<String>, text: impl Into<String>, time: Option<TimeExpr>) -> Self {
        Clause {
            name: name.into(),
            body: ClauseBody::Declaration(Declaration { text: text.into(), time }),
        }
    }

    pub fn composite(name: impl Into<String>, connective: Connective, children: Vec<Clause>) -> Self {
        Clause {
            name: name.into(),
            body: ClauseBody::Composite(Composite { connective, children, guard: None, reparation: None }),
        }
    }

    /// Builder: set the timing window (ignored on composites).
    pub fn with_time(mut self, time: TimeExpr) -> Self {
        match &mut self.body {
            ClauseBody::Atomic(a) => a.time = Some(time),
            ClauseBody::Declaration(d) => d.time = Some(time),
            ClauseBody::Composite(_) => {}
        }
        self
    }

    /// Builder: set the guard (ignored on declarations).
    pub fn with_guard(mut self, guard: Guard) -> Self {
        match &mut self.body {
            ClauseBody::Atomic(a) => a.guard = Some(guard),
            ClauseBody::Composite(c) => c.guard = Some(guard),
            ClauseBody::Declaration(_) => {}
        }
        self
    }

    /// Builder: set the reparation (ignored on declarations).
    pub fn with_reparation(mut self, name: impl Into<String>) -> Self {
        match &mut self.body {
            ClauseBody::Atomic(a) => a.reparation = Some(name.into()),
            ClauseBody::Composite(c) => c.reparation = Some(name.into()),
            ClauseBody::Declaration(_) => {}
        }
        self
    }

    pub fn guard(&self) -> Option<&Guard> {
        match &self.body {
            ClauseBody::Atomic(a) => a.guard.as_ref(),
            ClauseBody::Composite(c) => c.guard.as_ref(),
            ClauseBody::Declaration(_) => None,
        }
    }

    pub fn reparation(&self) -> Option<&str> {
        match &self.body {
            ClauseBody::Atomic(a) => a.reparation.as_deref(),
            ClauseBody::Composite(c) => c.reparation.as_deref(),
            ClauseBody::Declaration(_) => None,
        }
    }

    pub fn time(&self) -> Option<&TimeExpr> {
        match &self.body {
            ClauseBody::Atomic(a) => a.time.as_ref(),
            ClauseBody::Declaration(d) => d.time.as_ref(),
            ClauseBody::Composite(_) => None,
        }
    }

    pub fn children(&self) -> &[Clause] {
        match &self.body {
            ClauseBody::Composite(c) => &c.children,
            _ => &[],
        }
    }

    pub fn as_atomic(&self) -> Option<&Atomic> {
        match &self.body {
            ClauseBody::Atomic(a) => Some(a),
            _ => None,
        }
    }

    fn preorder<'a>(&'a self, parent: Option<&'a Clause>, in_reparations: bool, out: &mut Vec<ClauseRef<'a>>) {
        out.push(ClauseRef { clause: self, parent, in_reparations });
        for child in self.children() {
            child.preorder(Some(self), in_reparations, out);
        }
    }

    fn rename_all(&mut self, map: &HashMap<String, String>) {
        if let Some(new) = map.get(&self.name) {
            self.name = new.clone();
        }
        let rename_time = |t: &mut Option<TimeExpr>| {
            if let Some(TimeExpr { reference: Some(r), .. }) = t {
                if let Some(new) = map.get(r) {
                    *r = new.clone();
                }
            }
        };
        match &mut self.body {
            ClauseBody::Atomic(a) => {
                rename_time(&mut a.time);
                if let Some(g) = &mut a.guard {
                    g.rename(map);
                }
                if let Some(r) = &mut a.reparation {
                    if let Some(new) = map.get(r) {
                        *r = new.clone();
                    }
                }
            }
            ClauseBody::Declaration(d) => rename_time(&mut d.time),
            ClauseBody::Composite(c) => {
                if let Some(g) = &mut c.guard {
                    g.rename(map);
                }
                if let Some(r) = &mut c.reparation {
                    if let Some(new) = map.get(r) {
                        *r = new.clone();
                    }
                }
                for child in &mut c.children {
                    child.rename_all(map);
                }
            }
        }
    }
}

/// A clause in the tree, with its parent.
#[derive(Debug, Clone, Copy)]
pub struct ClauseRef<'a> {
    pub clause: &'a Clause,
    pub parent: Option<&'a Clause>,
    pub in_reparations: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContractModel {
    pub title: String,
    pub clauses: Vec<Clause>,
    /// Clauses that only become active when another clause is violated.
    pub reparations: Vec<Clause>,
}

impl ContractModel {
    pub fn new(title: impl Into<String>) -> Self {
        ContractModel { title: title.into(), ..Default::default() }
    }

    /// Every clause in document order: top-level trees first, then the
    /// reparation trees.
    pub fn all_clauses(&self) -> Vec<ClauseRef<'_>> {
        let mut out = Vec::new();
        for c in &self.clauses {
            c.preorder(None, false, &mut out);
        }
        for c in &self.reparations {
            c.preorder(None, true, &mut out);
        }
        out
    }

    /// Clauses of the main body (reparations excluded), preorder.
    pub fn body_clauses(&self) -> Vec<ClauseRef<'_>> {
        let mut out = Vec::new();
        for c in &self.clauses {
            c.preorder(None, false, &mut out);
        }
        out
    }

    pub fn find(&self, name: &str) -> Option<&Clause> {
        self.all_clauses().into_iter().map(|r| r.clause).find(|c| c.name == name)
    }

    /// Applies a clause renaming to names and every reference.
    pub fn rename(&mut self, map: &HashMap<String, String>) {
        for c in self.clauses.iter_mut().chain(self.reparations.iter_mut()) {
            c.rename_all(map);
        }
    }

    /// Largest time constant appearing in any window.
    pub fn max_constant(&self) -> u32 {
        self.all_clauses()
            .iter()
            .filter_map(|r| r.clause.time())
            .map(TimeExpr::max_constant)
            .max()
            .unwrap_or(0)
    }
}

/// Machine-readable validation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    DuplicateName,
    BadName,
    BadTime,
    UnresolvedReference,
    SelfGuard,
    BadReparation,
    ReparationCycle,
    UnreachableReparation,
    CompositeArity,
    EmptyDeclaration,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::DuplicateName => "DUPLICATE_NAME",
            DiagnosticCode::BadName => "BAD_NAME",
            DiagnosticCode::BadTime => "BAD_TIME",
            DiagnosticCode::UnresolvedReference => "UNRESOLVED_REFERENCE",
            DiagnosticCode::SelfGuard => "SELF_GUARD",
            DiagnosticCode::BadReparation => "BAD_REPARATION",
            DiagnosticCode::ReparationCycle => "REPARATION_CYCLE",
            DiagnosticCode::UnreachableReparation => "UNREACHABLE_REPARATION",
            DiagnosticCode::CompositeArity => "COMPOSITE_ARITY",
            DiagnosticCode::EmptyDeclaration => "EMPTY_DECLARATION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub clause: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code.as_str(), self.clause, self.message)
    }
}

fn diag(code: DiagnosticCode, clause: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic { code, clause: clause.to_string(), message: message.into() }
}

pub fn is_clause_name(name: &str) -> bool {
    CLAUSE_NAME.is_match(name)
}

/// Checks every model invariant. An empty result means the model is valid.
pub fn validate(model: &ContractModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let all = model.all_clauses();

    let mut seen = HashSet::new();
    for r in &all {
        let name = &r.clause.name;
        if !is_clause_name(name) {
            out.push(diag(DiagnosticCode::BadName, name, format!("`{name}` is not a valid clause name")));
        } else if !seen.insert(name.as_str()) {
            out.push(diag(DiagnosticCode::DuplicateName, name, format!("clause name `{name}` is used more than once")));
        }
    }
    let names: HashSet<&str> = all.iter().map(|r| r.clause.name.as_str()).collect();
    let reparation_roots: HashSet<&str> = model.reparations.iter().map(|c| c.name.as_str()).collect();

    for r in &all {
        let c = r.clause;
        if let Some(t) = c.time() {
            if t.low.is_none() && t.high.is_none() {
                out.push(diag(DiagnosticCode::BadTime, &c.name, "time window has no bounds"));
            }
            if let (Some(lo), Some(hi)) = (t.low, t.high) {
                if lo > hi {
                    out.push(diag(DiagnosticCode::BadTime, &c.name, format!("lower bound {lo} exceeds upper bound {hi}")));
                }
            }
            if t.strict && t.high.is_none() {
                out.push(diag(DiagnosticCode::BadTime, &c.name, "strict window without an upper bound"));
            }
            if let Some(reference) = &t.reference {
                if !names.contains(reference.as_str()) {
                    out.push(diag(
                        DiagnosticCode::UnresolvedReference,
                        &c.name,
                        format!("time window refers to unknown clause `{reference}`"),
                    ));
                }
            }
        }
        if let Some(g) = c.guard() {
            for reference in g.references() {
                if reference == c.name {
                    out.push(diag(DiagnosticCode::SelfGuard, &c.name, "guard refers to its own clause"));
                } else if !names.contains(reference) {
                    out.push(diag(
                        DiagnosticCode::UnresolvedReference,
                        &c.name,
                        format!("guard refers to unknown clause `{reference}`"),
                    ));
                }
            }
        }
        if let Some(rep) = c.reparation() {
            if !reparation_roots.contains(rep) {
                out.push(diag(
                    DiagnosticCode::BadReparation,
                    &c.name,
                    format!("reparation `{rep}` is not a top-level reparation clause"),
                ));
            }
        }
        match &c.body {
            ClauseBody::Composite(comp) if comp.children.len() < 2 => {
                out.push(diag(DiagnosticCode::CompositeArity, &c.name, "composite clause needs at least two children"));
            }
            ClauseBody::Declaration(d) if d.text.trim().is_empty() => {
                out.push(diag(DiagnosticCode::EmptyDeclaration, &c.name, "declaration has no text"));
            }
            _ => {}
        }
    }

    // Reparation reachability and acyclicity.
    let mut referenced = BTreeSet::new();
    for r in &all {
        if let Some(rep) = r.clause.reparation() {
            referenced.insert(rep);
        }
    }
    for rep in &model.reparations {
        if !referenced.contains(rep.name.as_str()) {
            out.push(diag(DiagnosticCode::UnreachableReparation, &rep.name, "reparation clause is never referenced"));
        }
    }
    let edges: HashMap<&str, Vec<&str>> = model
        .reparations
        .iter()
        .map(|root| {
            let mut subtree = Vec::new();
            root.preorder(None, true, &mut subtree);
            (root.name.as_str(), subtree.iter().filter_map(|r| r.clause.reparation()).collect())
        })
        .collect();
    if let Some(on_cycle) = find_cycle(&edges) {
        out.push(diag(DiagnosticCode::ReparationCycle, on_cycle, "reparation chain is cyclic"));
    }
    out
}

fn find_cycle<'a>(edges: &HashMap<&'a str, Vec<&'a str>>) -> Option<&'a str> {
    // 0 = unvisited, 1 = on stack, 2 = finished
    fn dfs<'a>(n: &'a str, edges: &HashMap<&'a str, Vec<&'a str>>, mark: &mut HashMap<&'a str, u8>) -> Option<&'a str> {
        match mark.get(n) {
            Some(1) => return Some(n),
            Some(2) => return None,
            _ => {}
        }
        mark.insert(n, 1);
        for &m in edges.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            if let Some(c) = dfs(m, edges, mark) {
                return Some(c);
            }
        }
        mark.insert(n, 2);
        None
    }
    let mut mark = HashMap::new();
    let mut roots: Vec<&str> = edges.keys().copied().collect();
    roots.sort_unstable();
    roots.into_iter().find_map(|r| dfs(r, edges, &mut mark))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("generated name `{0}` collides with a user-supplied clause name")]
pub struct NameCollision(pub String);

/// Assigns names to unnamed clauses: `c<k>` for the k-th top-level clause
/// (reparations continue the count) and `<parent>_<i>` for the i-th child.
pub fn autoname(model: &ContractModel) -> Result<ContractModel, NameCollision> {
    let user: HashSet<String> = model
        .all_clauses()
        .iter()
        .map(|r| r.clause.name.clone())
        .filter(|n| !n.is_empty())
        .collect();
    let mut out = model.clone();
    let roots = out.clauses.iter_mut().chain(out.reparations.iter_mut());
    for (k, clause) in roots.enumerate() {
        name_tree(clause, format!("c{}", k + 1), &user)?;
    }
    Ok(out)
}

fn name_tree(clause: &mut Clause, generated: String, user: &HashSet<String>) -> Result<(), NameCollision> {
    if clause.name.is_empty() {
        if user.contains(&generated) {
            return Err(NameCollision(generated));
        }
        clause.name = generated;
    }
    let parent = clause.name.clone();
    if let ClauseBody::Composite(c) = &mut clause.body {
        for (i, child) in c.children.iter_mut().enumerate() {
            name_tree(child, format!("{parent}_{}", i + 1), user)?;
        }
    }
    Ok(())
}

/// Distinct agents of atomic clauses, sorted.
pub fn collect_agents(model: &ContractModel) -> Vec<Agent> {
    let set: BTreeSet<Agent> = model
        .all_clauses()
        .iter()
        .filter_map(|r| r.clause.as_atomic())
        .map(|a| a.agent.clone())
        .collect();
    set.into_iter().collect()
}

/// Distinct actions of atomic clauses, sorted by label.
pub fn collect_actions(model: &ContractModel) -> Vec<Action> {
    let set: BTreeSet<Action> = model
        .all_clauses()
        .iter()
        .filter_map(|r| r.clause.as_atomic())
        .map(|a| a.action.clone())
        .collect();
    set.into_iter().collect()
}

/// Renames every clause to a canonical positional name, so that models can
/// be compared up to naming.
pub fn canonical_names(model: &ContractModel) -> ContractModel {
    let mut map = HashMap::new();
    fn assign(c: &Clause, name: String, map: &mut HashMap<String, String>) {
        for (i, child) in c.children().iter().enumerate() {
            assign(child, format!("{name}_{}", i + 1), map);
        }
        map.insert(c.name.clone(), name);
    }
    for (k, c) in model.clauses.iter().chain(model.reparations.iter()).enumerate() {
        assign(c, format!("n{}", k + 1), &mut map);
    }
    let mut out = model.clone();
    out.rename(&map);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn student() -> Agent {
        Agent::new("student").unwrap()
    }

    fn obligation(name: &str, phrase: &str) -> Clause {
        Clause::atomic(name, student(), Modality::Obligation, Action::from_phrase(phrase).unwrap())
    }

    #[test]
    fn empty_model_is_valid() {
        assert!(validate(&ContractModel::new("t")).is_empty());
    }

    #[test]
    fn duplicate_names_are_reported_once() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("c1", "pay"));
        m.clauses.push(obligation("c1", "leave"));
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::DuplicateName);
    }

    #[test]
    fn self_guard_and_unresolved_refs() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("a", "pay").with_guard(Guard::and(Guard::done("a"), Guard::violated("zz"))));
        let codes: Vec<_> = validate(&m).into_iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::SelfGuard, DiagnosticCode::UnresolvedReference]);
    }

    #[test]
    fn time_window_checks() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("a", "pay").with_time(TimeExpr::between(5, 3)));
        m.clauses.push(obligation("b", "pay").with_time(TimeExpr::default()));
        m.clauses.push(obligation("c", "pay").with_time(TimeExpr::by(3).relative_to("nope")));
        let codes: Vec<_> = validate(&m).into_iter().map(|d| d.code).collect();
        assert_eq!(
            codes,
            vec![DiagnosticCode::BadTime, DiagnosticCode::BadTime, DiagnosticCode::UnresolvedReference]
        );
    }

    #[test]
    fn reparations_must_be_top_level_reachable_and_acyclic() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("a", "pay").with_reparation("r1"));
        m.reparations.push(obligation("r1", "pay fine").with_reparation("r2"));
        m.reparations.push(obligation("r2", "pay more").with_reparation("r1"));
        m.reparations.push(obligation("r3", "apologise"));
        let codes: Vec<_> = validate(&m).into_iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagnosticCode::ReparationCycle));
        assert!(codes.contains(&DiagnosticCode::UnreachableReparation));

        let mut m2 = ContractModel::new("t");
        m2.clauses.push(obligation("a", "pay").with_reparation("b"));
        m2.clauses.push(obligation("b", "pay"));
        assert_eq!(validate(&m2)[0].code, DiagnosticCode::BadReparation);
    }

    #[test]
    fn composite_needs_two_children() {
        let mut m = ContractModel::new("t");
        m.clauses.push(Clause::composite("a", Connective::Choice, vec![obligation("a_1", "pay")]));
        assert_eq!(validate(&m)[0].code, DiagnosticCode::CompositeArity);
    }

    #[test]
    fn autoname_scheme() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("", "pay"));
        m.clauses.push(Clause::composite(
            "",
            Connective::Conjunction,
            vec![obligation("", "a"), obligation("", "b"), obligation("", "c")],
        ));
        let named = autoname(&m).unwrap();
        let names: Vec<_> = named.all_clauses().iter().map(|r| r.clause.name.clone()).collect();
        assert_eq!(names, ["c1", "c2", "c2_1", "c2_2", "c2_3"]);
        assert_eq!(autoname(&named).unwrap(), named);
    }

    #[test]
    fn autoname_collision() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("", "pay"));
        m.clauses.push(obligation("c1", "leave"));
        assert_eq!(autoname(&m), Err(NameCollision("c1".into())));
    }

    #[test]
    fn action_label_and_key() {
        let a = Action::from_phrase("Sign up  for exam").unwrap();
        assert_eq!(a.verb(), "sign");
        assert_eq!(a.object(), "up for exam");
        assert_eq!(a.label(), "sign up for exam");
        assert_eq!(ActionKey::new(&student(), &a).as_str(), "student_sign_up_for_exam");
        assert!(Action::new("Pay", "").is_err());
        assert!(Action::new("pay", "the (bill)").is_err());
        assert_eq!(Agent::normalize("Course  Admin").unwrap().as_str(), "course_admin");
    }

    #[test]
    fn collections_are_sorted_and_unique() {
        let mut m = ContractModel::new("t");
        m.clauses.push(obligation("a", "pay"));
        m.clauses.push(Clause::atomic("b", Agent::new("bank").unwrap(), Modality::Permission, Action::from_phrase("audit").unwrap()));
        m.clauses.push(obligation("c", "pay"));
        assert_eq!(collect_agents(&m), vec![Agent::new("bank").unwrap(), student()]);
        let labels: Vec<_> = collect_actions(&m).iter().map(Action::label).collect();
        assert_eq!(labels, ["audit", "pay"]);
        assert!(collect_agents(&ContractModel::default()).is_empty());
    }
}
