//! Translation of a contract model into a network of timed automata, the
//! UPPAAL XML rendering of that network, and the property language used by
//! the semantic queries.
//!
//! Every clause becomes a four-location automaton (`Inactive`, `Enabled`,
//! `Done`, `Violated`) whose location is mirrored in an `st_<clause>`
//! variable so other automata can test it. Each action key `agent_action`
//! gets a sender automaton that broadcasts on `act_<key>` whenever some
//! enabled clause allows the action, resetting `Clocks[key]` and setting
//! `done[key]`. Edges without a channel are internal and are taken as soon
//! as their guard holds.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::coml::escape_xml;
use crate::contract::{
    validate, Action, ActionKey, Agent, Clause, ClauseBody, Connective, ContractModel, Diagnostic, Guard, Modality,
    TimeExpr,
};

pub type ClockId = usize;
pub type VarId = usize;
pub type ChanId = usize;

pub const INACTIVE: i32 = 0;
pub const ENABLED: i32 = 1;
pub const DONE: i32 = 2;
pub const VIOLATED: i32 = 3;
pub const STATUS_NAMES: [&str; 4] = ["INACTIVE", "ENABLED", "DONE", "VIOLATED"];
const LOCATION_NAMES: [&str; 4] = ["Inactive", "Enabled", "Done", "Violated"];

/// The global clock; always clock 0.
pub const T0: ClockId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, lhs: u32, rhs: u32) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Guard and invariant expressions over integer variables and clocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    True,
    False,
    VarEq(VarId, i32),
    Clock(ClockId, CmpOp, u32),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn and(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Expr::True => {}
                Expr::False => return Expr::False,
                Expr::And(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Expr::True,
            1 => out.pop().unwrap(),
            _ => Expr::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Expr::False => {}
                Expr::True => return Expr::True,
                Expr::Or(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Expr::False,
            1 => out.pop().unwrap(),
            _ => Expr::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        match e {
            Expr::True => Expr::False,
            Expr::False => Expr::True,
            Expr::Not(inner) => *inner,
            e => Expr::Not(Box::new(e)),
        }
    }

    pub fn visit_vars(&self, f: &mut impl FnMut(VarId)) {
        match self {
            Expr::VarEq(v, _) => f(*v),
            Expr::Not(e) => e.visit_vars(f),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.visit_vars(f)),
            _ => {}
        }
    }

    pub fn visit_clocks(&self, f: &mut impl FnMut(ClockId)) {
        match self {
            Expr::Clock(c, ..) => f(*c),
            Expr::Not(e) => e.visit_clocks(f),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.visit_clocks(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClockKind {
    Global,
    Action(usize),
    Clause(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    Status(String),
    Done(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub name: String,
    pub invariant: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncDir {
    Send,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sync {
    pub channel: ChanId,
    pub dir: SyncDir,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub guard: Expr,
    pub sync: Option<Sync>,
    pub resets: Vec<ClockId>,
    pub updates: Vec<(VarId, i32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedAutomaton {
    pub name: String,
    pub locations: Vec<Location>,
    pub initial: usize,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyInfo {
    pub key: ActionKey,
    pub agent: Agent,
    pub action: Action,
    pub clock: ClockId,
    pub done: VarId,
    pub channel: ChanId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaNetwork {
    pub clocks: Vec<ClockKind>,
    pub vars: Vec<VarKind>,
    pub keys: Vec<KeyInfo>,
    pub automata: Vec<TimedAutomaton>,
    /// Body of `allComplete()`.
    pub all_complete: Expr,
    /// Body of `conflict(k)` for each key.
    pub conflicts: Vec<Expr>,
    pub max_constant: u32,
}

impl TaNetwork {
    pub fn key_index(&self, key: &str) -> Option<usize> {
        self.keys.iter().position(|k| k.key.as_str() == key)
    }

    pub fn channel_name(&self, c: ChanId) -> String {
        format!("act_{}", self.keys[c].key)
    }

    pub fn clock_name(&self, c: ClockId) -> String {
        match &self.clocks[c] {
            ClockKind::Global => "t0".into(),
            ClockKind::Action(k) => format!("Clocks[{}]", self.keys[*k].key),
            ClockKind::Clause(name) => format!("cc_{name}"),
        }
    }

    pub fn var_name(&self, v: VarId) -> String {
        match &self.vars[v] {
            VarKind::Status(name) => format!("st_{name}"),
            VarKind::Done(k) => format!("done[{}]", self.keys[*k].key),
        }
    }

    /// Variable holding the status of `clause`.
    pub fn status_var(&self, clause: &str) -> Option<VarId> {
        self.vars.iter().position(|v| matches!(v, VarKind::Status(n) if n == clause))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NtaError {
    #[error("model is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Diagnostic>),
    #[error("clause `{0}` cannot be translated")]
    Unsupported(String),
    #[error("no clause concerns action key `{0}`")]
    UnknownActionKey(String),
}

impl NtaError {
    pub fn code(&self) -> &'static str {
        match self {
            NtaError::InvalidModel(_) => "INVARIANT_VIOLATION",
            NtaError::Unsupported(_) => "UNSUPPORTED",
            NtaError::UnknownActionKey(_) => "UNKNOWN_ACTION_KEY",
        }
    }
}

// ---------------------------------------------------------------- translate

struct Info<'a> {
    clause: &'a Clause,
    parent: Option<usize>,
    /// Position among the parent's children.
    index: usize,
    in_reparations: bool,
}

struct Builder<'a> {
    infos: Vec<Info<'a>>,
    by_name: HashMap<&'a str, usize>,
    /// Clauses whose reparation is the given clause.
    repaired_by: HashMap<&'a str, Vec<usize>>,
    key_of: BTreeMap<String, usize>,
}

impl<'a> Builder<'a> {
    fn new(model: &'a ContractModel) -> Self {
        let mut b = Builder { infos: Vec::new(), by_name: HashMap::new(), repaired_by: HashMap::new(), key_of: BTreeMap::new() };
        for c in &model.clauses {
            b.add(c, None, 0, false);
        }
        for c in &model.reparations {
            b.add(c, None, 0, true);
        }
        for (i, info) in b.infos.iter().enumerate() {
            if let Some(r) = info.clause.reparation() {
                b.repaired_by.entry(r).or_default().push(i);
            }
        }
        let keys: std::collections::BTreeSet<String> =
            b.infos.iter().filter_map(|i| i.clause.as_atomic()).map(|a| a.key().as_str().to_string()).collect();
        b.key_of = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
        b
    }

    fn add(&mut self, c: &'a Clause, parent: Option<usize>, index: usize, in_reparations: bool) {
        let id = self.infos.len();
        self.infos.push(Info { clause: c, parent, index, in_reparations });
        self.by_name.insert(&c.name, id);
        for (i, child) in c.children().iter().enumerate() {
            self.add(child, Some(id), i, in_reparations);
        }
    }

    // Variables: status of clause i is var i; done[k] follows. Clocks: t0,
    // then cc per clause, then Clocks[k].
    fn st_var(&self, name: &str) -> VarId {
        self.by_name[name]
    }

    fn cc(&self, name: &str) -> ClockId {
        1 + self.by_name[name]
    }

    fn is(&self, name: &str, status: i32) -> Expr {
        Expr::VarEq(self.st_var(name), status)
    }

    fn succeeded(&self, name: &str) -> Expr {
        let c = self.infos[self.by_name[name]].clause;
        match c.reparation() {
            None => self.is(name, DONE),
            Some(r) => Expr::or([self.is(name, DONE), Expr::and([self.is(name, VIOLATED), self.succeeded(r)])]),
        }
    }

    fn failed(&self, name: &str) -> Expr {
        let c = self.infos[self.by_name[name]].clause;
        match c.reparation() {
            None => self.is(name, VIOLATED),
            Some(r) => Expr::and([self.is(name, VIOLATED), self.failed(r)]),
        }
    }

    fn activation(&self, id: usize) -> Expr {
        let info = &self.infos[id];
        match info.parent {
            None if info.in_reparations => {
                let sources = self.repaired_by.get(info.clause.name.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                Expr::or(sources.iter().map(|&v| self.is(&self.infos[v].clause.name, VIOLATED)))
            }
            None => Expr::True,
            Some(p) => {
                let parent = self.infos[p].clause;
                let mut parts = vec![self.is(&parent.name, ENABLED)];
                if let ClauseBody::Composite(comp) = &parent.body {
                    if comp.connective == Connective::Sequence && info.index > 0 {
                        parts.push(self.succeeded(&comp.children[info.index - 1].name));
                    }
                }
                Expr::and(parts)
            }
        }
    }

    /// The guard is definitely true.
    fn dt(&self, g: &Guard) -> Expr {
        match g {
            Guard::Done(x) => self.is(x, DONE),
            Guard::Violated(x) => self.is(x, VIOLATED),
            Guard::Not(inner) => self.df(inner),
            Guard::And(a, b) => Expr::and([self.dt(a), self.dt(b)]),
            Guard::Or(a, b) => Expr::or([self.dt(a), self.dt(b)]),
        }
    }

    /// The guard is definitely false: its clauses have settled the other way.
    fn df(&self, g: &Guard) -> Expr {
        match g {
            Guard::Done(x) => self.is(x, VIOLATED),
            Guard::Violated(x) => self.is(x, DONE),
            Guard::Not(inner) => self.dt(inner),
            Guard::And(a, b) => Expr::or([self.df(a), self.df(b)]),
            Guard::Or(a, b) => Expr::and([self.df(a), self.df(b)]),
        }
    }

    /// The clock a window is measured on, plus the condition for it to count.
    fn window_clock(&self, t: &TimeExpr) -> (ClockId, Expr) {
        match &t.reference {
            None => (T0, Expr::True),
            Some(r) => (self.cc(r), Expr::not(self.is(r, INACTIVE))),
        }
    }

    fn open(&self, t: Option<&TimeExpr>) -> Expr {
        let Some(t) = t else { return Expr::True };
        let (x, live) = self.window_clock(t);
        let lo = t.low.map(|l| Expr::Clock(x, CmpOp::Ge, l)).unwrap_or(Expr::True);
        let hi = t.high.map(|h| Expr::Clock(x, if t.strict { CmpOp::Lt } else { CmpOp::Le }, h)).unwrap_or(Expr::True);
        Expr::and([live, lo, hi])
    }

    fn deadline_passed(&self, t: Option<&TimeExpr>) -> Option<Expr> {
        let t = t?;
        let h = t.high?;
        let (x, live) = self.window_clock(t);
        Some(Expr::and([live, Expr::Clock(x, if t.strict { CmpOp::Ge } else { CmpOp::Gt }, h)]))
    }

    fn invariant(&self, name: &str, t: Option<&TimeExpr>) -> Option<Expr> {
        let t = t?;
        let h = t.high?;
        match &t.reference {
            None => Some(Expr::Clock(T0, CmpOp::Le, h)),
            Some(r) if r == name => Some(Expr::Clock(self.cc(r), CmpOp::Le, h)),
            // the referenced clock may not have started yet
            Some(_) => None,
        }
    }

    fn clause_automaton(&self, id: usize) -> TimedAutomaton {
        let info = &self.infos[id];
        let c = info.clause;
        let name = c.name.as_str();
        let st = self.st_var(name);
        let edge = |src: i32, dst: i32, guard: Expr| Edge {
            src: src as usize,
            dst: dst as usize,
            guard,
            sync: None,
            resets: vec![],
            updates: vec![(st, dst)],
        };
        let act = self.activation(id);
        let mut edges = Vec::new();
        let mut enable = edge(INACTIVE, ENABLED, Expr::and([act.clone(), c.guard().map(|g| self.dt(g)).unwrap_or(Expr::True)]));
        enable.resets.push(self.cc(name));
        edges.push(enable);
        if let Some(g) = c.guard() {
            edges.push(edge(INACTIVE, DONE, Expr::and([act, self.df(g)])));
        }
        if let Some(p) = info.parent {
            let parent = self.infos[p].clause;
            let choice = matches!(&parent.body, ClauseBody::Composite(k) if k.connective == Connective::Choice);
            let mut stop = vec![self.is(&parent.name, INACTIVE)];
            if choice {
                stop.push(self.is(&parent.name, DONE));
                stop.push(self.is(&parent.name, VIOLATED));
            }
            edges.push(edge(ENABLED, INACTIVE, Expr::or(stop)));
        }
        let mut invariant = None;
        match &c.body {
            ClauseBody::Atomic(a) => {
                let k = self.key_of[a.key().as_str()];
                let hit = if a.modality == Modality::Prohibition { VIOLATED } else { DONE };
                let mut fire = edge(ENABLED, hit, self.open(a.time.as_ref()));
                fire.sync = Some(Sync { channel: k, dir: SyncDir::Receive });
                edges.push(fire);
                if let Some(passed) = self.deadline_passed(a.time.as_ref()) {
                    let end = if a.modality == Modality::Obligation { VIOLATED } else { DONE };
                    edges.push(edge(ENABLED, end, passed));
                }
                invariant = self.invariant(name, a.time.as_ref());
            }
            ClauseBody::Declaration(d) => {
                let reached = match &d.time {
                    Some(t) => {
                        let (x, live) = self.window_clock(t);
                        Expr::and([live, t.low.map(|l| Expr::Clock(x, CmpOp::Ge, l)).unwrap_or(Expr::True)])
                    }
                    None => Expr::True,
                };
                edges.push(edge(ENABLED, DONE, reached));
                invariant = self.invariant(name, d.time.as_ref());
            }
            ClauseBody::Composite(comp) => {
                let kids: Vec<&str> = comp.children.iter().map(|k| k.name.as_str()).collect();
                let any_failed = Expr::or(kids.iter().map(|k| self.failed(k)));
                let any_succeeded = Expr::or(kids.iter().map(|k| self.succeeded(k)));
                match comp.connective {
                    Connective::Conjunction => {
                        edges.push(edge(ENABLED, VIOLATED, any_failed));
                        edges.push(edge(ENABLED, DONE, Expr::and(kids.iter().map(|k| self.succeeded(k)))));
                    }
                    Connective::Sequence => {
                        edges.push(edge(ENABLED, VIOLATED, any_failed));
                        edges.push(edge(ENABLED, DONE, self.succeeded(kids[kids.len() - 1])));
                    }
                    Connective::Choice => {
                        edges.push(edge(ENABLED, DONE, any_succeeded));
                        edges.push(edge(ENABLED, VIOLATED, Expr::and(kids.iter().map(|k| self.failed(k)))));
                    }
                }
            }
        }
        let locations = LOCATION_NAMES
            .iter()
            .enumerate()
            .map(|(i, n)| Location { name: n.to_string(), invariant: if i == ENABLED as usize { invariant.clone() } else { None } })
            .collect();
        TimedAutomaton { name: name.to_string(), locations, initial: INACTIVE as usize, edges }
    }

    fn sender(&self, key: &str, k: usize, n_clauses: usize) -> TimedAutomaton {
        let mut edges = Vec::new();
        for info in &self.infos {
            let Some(a) = info.clause.as_atomic() else { continue };
            if a.key().as_str() != key {
                continue;
            }
            edges.push(Edge {
                src: 0,
                dst: 0,
                guard: Expr::and([self.is(&info.clause.name, ENABLED), self.open(a.time.as_ref())]),
                sync: Some(Sync { channel: k, dir: SyncDir::Send }),
                resets: vec![1 + n_clauses + k],
                updates: vec![(n_clauses + k, 1)],
            });
        }
        TimedAutomaton {
            name: format!("env_{key}"),
            locations: vec![Location { name: "Idle".into(), invariant: None }],
            initial: 0,
            edges,
        }
    }
}

pub fn translate(model: &ContractModel) -> Result<TaNetwork, NtaError> {
    let diags = validate(model);
    if !diags.is_empty() {
        return Err(NtaError::InvalidModel(diags));
    }
    let b = Builder::new(model);
    let n = b.infos.len();
    let mut clocks = vec![ClockKind::Global];
    clocks.extend(b.infos.iter().map(|i| ClockKind::Clause(i.clause.name.clone())));
    let mut vars: Vec<VarKind> = b.infos.iter().map(|i| VarKind::Status(i.clause.name.clone())).collect();
    let mut keys = Vec::new();
    for (key, &k) in &b.key_of {
        let a = b.infos.iter().filter_map(|i| i.clause.as_atomic()).find(|a| a.key().as_str() == key).expect("key from model");
        clocks.push(ClockKind::Action(k));
        vars.push(VarKind::Done(k));
        keys.push(KeyInfo {
            key: a.key(),
            agent: a.agent.clone(),
            action: a.action.clone(),
            clock: 1 + n + k,
            done: n + k,
            channel: k,
        });
    }
    let mut automata: Vec<TimedAutomaton> = (0..n).map(|i| b.clause_automaton(i)).collect();
    for (key, &k) in &b.key_of {
        automata.push(b.sender(key, k, n));
    }
    let all_complete = Expr::and(model.clauses.iter().map(|c| b.succeeded(&c.name)));
    let conflicts = b
        .key_of
        .keys()
        .map(|key| {
            let enabled = |m: Modality| {
                Expr::or(b.infos.iter().filter_map(|i| {
                    let a = i.clause.as_atomic()?;
                    (a.modality == m && a.key().as_str() == key).then(|| b.is(&i.clause.name, ENABLED))
                }))
            };
            Expr::and([enabled(Modality::Obligation), enabled(Modality::Prohibition)])
        })
        .collect();
    Ok(TaNetwork { clocks, vars, keys, automata, all_complete, conflicts, max_constant: model.max_constant() })
}

// ---------------------------------------------------------------- UPPAAL XML

struct Render<'a>(&'a TaNetwork);

impl Render<'_> {
    fn expr(&self, e: &Expr) -> String {
        let net = self.0;
        match e {
            Expr::True => "true".into(),
            Expr::False => "false".into(),
            Expr::VarEq(v, value) => match &net.vars[*v] {
                VarKind::Status(_) => format!("{} == {}", net.var_name(*v), STATUS_NAMES[*value as usize]),
                VarKind::Done(_) if *value == 0 => format!("!{}", net.var_name(*v)),
                VarKind::Done(_) => net.var_name(*v),
            },
            Expr::Clock(c, op, n) => format!("{} {} {n}", net.clock_name(*c), op.symbol()),
            Expr::Not(inner) => format!("!({})", self.expr(inner)),
            Expr::And(parts) => self.join(parts, " && "),
            Expr::Or(parts) => self.join(parts, " || "),
        }
    }

    fn join(&self, parts: &[Expr], sep: &str) -> String {
        let rendered: Vec<String> = parts
            .iter()
            .map(|p| match p {
                Expr::And(_) | Expr::Or(_) => format!("({})", self.expr(p)),
                _ => self.expr(p),
            })
            .collect();
        rendered.join(sep)
    }

    fn assignment(&self, edge: &Edge) -> String {
        let net = self.0;
        let mut parts: Vec<String> = edge
            .updates
            .iter()
            .map(|&(v, value)| match &net.vars[v] {
                VarKind::Status(_) => format!("{} = {}", net.var_name(v), STATUS_NAMES[value as usize]),
                VarKind::Done(_) => format!("{} = {}", net.var_name(v), value != 0),
            })
            .collect();
        parts.extend(edge.resets.iter().map(|&c| format!("{} = 0", net.clock_name(c))));
        parts.join(", ")
    }

    fn declarations(&self) -> String {
        let net = self.0;
        let n = net.keys.len();
        let mut d = String::new();
        d.push_str("// global time, never reset\nclock t0;\n");
        for (i, s) in STATUS_NAMES.iter().enumerate() {
            let _ = writeln!(d, "const int {s} = {i};");
        }
        if n > 0 {
            let _ = writeln!(d, "const int N_KEYS = {n};");
            for (i, k) in net.keys.iter().enumerate() {
                let _ = writeln!(d, "const int {} = {i};", k.key);
            }
            d.push_str("clock Clocks[N_KEYS];\nbool done[N_KEYS];\n");
            for c in 0..n {
                let _ = writeln!(d, "broadcast chan {};", net.channel_name(c));
            }
        }
        for (c, kind) in net.clocks.iter().enumerate() {
            if matches!(kind, ClockKind::Clause(_)) {
                let _ = writeln!(d, "clock {};", net.clock_name(c));
            }
        }
        for (v, kind) in net.vars.iter().enumerate() {
            if matches!(kind, VarKind::Status(_)) {
                let _ = writeln!(d, "int[0,3] {} = INACTIVE;", net.var_name(v));
            }
        }
        let _ = writeln!(d, "\nbool allComplete() {{\n    return {};\n}}", self.expr(&net.all_complete));
        if n > 0 {
            d.push_str("\nbool isDone(int k) {\n    return done[k];\n}\n");
        } else {
            d.push_str("\nbool isDone(int k) {\n    return false;\n}\n");
        }
        d.push_str("\nbool conflict(int k) {\n");
        for (k, e) in net.conflicts.iter().enumerate() {
            if *e != Expr::False {
                let _ = writeln!(d, "    if (k == {}) return {};", net.keys[k].key, self.expr(e));
            }
        }
        d.push_str("    return false;\n}\n");
        d
    }
}

fn template_name(a: &TimedAutomaton) -> String {
    if a.name.starts_with("env_") {
        format!("Env_{}", &a.name[4..])
    } else {
        format!("C_{}", a.name)
    }
}

/// Renders the network as a flat UPPAAL 4.x document.
pub fn emit_uppaal_xml(net: &TaNetwork) -> String {
    let r = Render(net);
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n");
    x.push_str("<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' 'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>\n");
    x.push_str("<nta>\n");
    let _ = writeln!(x, "  <declaration>{}</declaration>", escape_text(&r.declarations()));
    for (ai, a) in net.automata.iter().enumerate() {
        x.push_str("  <template>\n");
        let _ = writeln!(x, "    <name>{}</name>", template_name(a));
        for (li, loc) in a.locations.iter().enumerate() {
            let _ = writeln!(x, "    <location id=\"id{ai}_{li}\" x=\"{}\" y=\"0\">", li * 200);
            let _ = writeln!(x, "      <name>{}</name>", escape_xml(&loc.name));
            if let Some(inv) = &loc.invariant {
                let _ = writeln!(x, "      <label kind=\"invariant\">{}</label>", escape_xml(&r.expr(inv)));
            }
            x.push_str("    </location>\n");
        }
        let _ = writeln!(x, "    <init ref=\"id{ai}_{}\"/>", a.initial);
        for e in &a.edges {
            x.push_str("    <transition>\n");
            let _ = writeln!(x, "      <source ref=\"id{ai}_{}\"/>", e.src);
            let _ = writeln!(x, "      <target ref=\"id{ai}_{}\"/>", e.dst);
            if e.guard != Expr::True {
                let _ = writeln!(x, "      <label kind=\"guard\">{}</label>", escape_xml(&r.expr(&e.guard)));
            }
            if let Some(s) = e.sync {
                let mark = if s.dir == SyncDir::Send { '!' } else { '?' };
                let _ = writeln!(x, "      <label kind=\"synchronisation\">{}{mark}</label>", net.channel_name(s.channel));
            }
            let assign = r.assignment(e);
            if !assign.is_empty() {
                let _ = writeln!(x, "      <label kind=\"assignment\">{}</label>", escape_xml(&assign));
            }
            x.push_str("    </transition>\n");
        }
        x.push_str("  </template>\n");
    }
    let names: Vec<String> = net.automata.iter().map(template_name).collect();
    if names.is_empty() {
        // UPPAAL needs at least one process
        x.push_str("  <template>\n    <name>Idle</name>\n    <location id=\"idle\" x=\"0\" y=\"0\"/>\n    <init ref=\"idle\"/>\n  </template>\n");
        x.push_str("  <system>system Idle;</system>\n");
    } else {
        let _ = writeln!(x, "  <system>system {};</system>", names.join(", "));
    }
    x.push_str("</nta>\n");
    x
}

/// Escapes element text but keeps newlines literal.
fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------- properties

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    /// `A[]`: in every reachable state.
    Always,
    /// `E<>`: in some reachable state.
    Eventually,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropExpr {
    AllComplete,
    IsDone(String),
    Conflict(String),
    /// `t0 - Clocks[key] < N`: the action last happened before time N.
    ClockDiffLt(String, u32),
    Not(Box<PropExpr>),
    And(Box<PropExpr>, Box<PropExpr>),
    Or(Box<PropExpr>, Box<PropExpr>),
    Implies(Box<PropExpr>, Box<PropExpr>),
}

impl PropExpr {
    pub fn not(e: PropExpr) -> Self {
        PropExpr::Not(Box::new(e))
    }

    pub fn and(a: PropExpr, b: PropExpr) -> Self {
        PropExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: PropExpr, b: PropExpr) -> Self {
        PropExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: PropExpr, b: PropExpr) -> Self {
        PropExpr::Implies(Box::new(a), Box::new(b))
    }

    pub fn keys(&self) -> Vec<&str> {
        match self {
            PropExpr::AllComplete => vec![],
            PropExpr::IsDone(k) | PropExpr::Conflict(k) | PropExpr::ClockDiffLt(k, _) => vec![k.as_str()],
            PropExpr::Not(e) => e.keys(),
            PropExpr::And(a, b) | PropExpr::Or(a, b) | PropExpr::Implies(a, b) => {
                let mut v = a.keys();
                v.extend(b.keys());
                v
            }
        }
    }
}

impl fmt::Display for PropExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn sub(f: &mut fmt::Formatter<'_>, e: &PropExpr) -> fmt::Result {
            match e {
                PropExpr::And(..) | PropExpr::Or(..) | PropExpr::Implies(..) => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            PropExpr::AllComplete => f.write_str("allComplete()"),
            PropExpr::IsDone(k) => write!(f, "isDone({k})"),
            PropExpr::Conflict(k) => write!(f, "conflict({k})"),
            PropExpr::ClockDiffLt(k, n) => write!(f, "t0 - Clocks[{k}] < {n}"),
            PropExpr::Not(e) => {
                f.write_str("not ")?;
                match e.as_ref() {
                    PropExpr::ClockDiffLt(..) => write!(f, "({e})"),
                    _ => sub(f, e),
                }
            }
            PropExpr::And(a, b) | PropExpr::Or(a, b) | PropExpr::Implies(a, b) => {
                let op = match self {
                    PropExpr::And(..) => "and",
                    PropExpr::Or(..) => "or",
                    _ => "imply",
                };
                sub(f, a)?;
                write!(f, " {op} ")?;
                sub(f, b)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Property {
    pub quantifier: Quantifier,
    pub body: PropExpr,
}

impl fmt::Display for Property {
    /// UPPAAL query syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = match self.quantifier {
            Quantifier::Always => "A[]",
            Quantifier::Eventually => "E<>",
        };
        write!(f, "{q} {}", self.body)
    }
}

/// The model-checking questions among the query templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemanticQuery {
    /// Must `agent` perform `action` before time `bound` whenever the contract completes?
    MustBefore { agent: Agent, action: Action, bound: u32 },
    /// Can the contract be completed without `agent` performing `action`?
    CanAvoid { agent: Agent, action: Action },
    /// Can the contract be completed at all?
    Completable,
    /// Is `agent` never both obliged and forbidden to perform `action`?
    NoConflict { agent: Agent, action: Action },
}

pub fn encode_property(query: &SemanticQuery, net: &TaNetwork) -> Result<Property, NtaError> {
    let key = |agent: &Agent, action: &Action| {
        let k = ActionKey::new(agent, action).as_str().to_string();
        match net.key_index(&k) {
            Some(_) => Ok(k),
            None => Err(NtaError::UnknownActionKey(k)),
        }
    };
    Ok(match query {
        SemanticQuery::MustBefore { agent, action, bound } => {
            let k = key(agent, action)?;
            Property {
                quantifier: Quantifier::Always,
                body: PropExpr::implies(
                    PropExpr::AllComplete,
                    PropExpr::and(PropExpr::IsDone(k.clone()), PropExpr::ClockDiffLt(k, *bound)),
                ),
            }
        }
        SemanticQuery::CanAvoid { agent, action } => {
            let k = key(agent, action)?;
            Property {
                quantifier: Quantifier::Eventually,
                body: PropExpr::and(PropExpr::AllComplete, PropExpr::not(PropExpr::IsDone(k))),
            }
        }
        SemanticQuery::Completable => Property { quantifier: Quantifier::Eventually, body: PropExpr::AllComplete },
        SemanticQuery::NoConflict { agent, action } => {
            let k = key(agent, action)?;
            Property { quantifier: Quantifier::Always, body: PropExpr::not(PropExpr::Conflict(k)) }
        }
    })
}

/// Contents of a `.q` query file, one property per line.
pub fn render_queries(props: &[Property]) -> String {
    props.iter().map(|p| format!("{p}\n")).collect()
}
