//! Explicit-state model checking of a [`TaNetwork`] in discrete time.
//!
//! A state records the global time, every automaton's location, and those
//! variables and clock reset times that some guard or the property reads.
//! From a state either one action fires (a sender's broadcast plus every
//! receiver whose guard holds) or time advances by one unit, up to the
//! horizon. After each step internal edges are taken until nothing changes:
//! in each round every automaton takes its first enabled internal edge,
//! all evaluated against the state at the start of the round.
//!
//! Search is breadth-first with actions (by key) explored before delay, so
//! the first counterexample or witness found is a shortest one.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::contract::{Action, Agent};
use crate::nta::{Expr, PropExpr, Property, Quantifier, SyncDir, TaNetwork, T0};

pub const DEFAULT_STATE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Defaults to the network's largest constant plus one.
    pub horizon: Option<u32>,
    pub state_limit: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { horizon: None, state_limit: DEFAULT_STATE_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("horizon {horizon} is below the required {required} (largest constant plus one)")]
    HorizonTooSmall { horizon: u32, required: u32 },
    #[error("explored more than {limit} states")]
    StateLimit { limit: usize },
    #[error("no clause concerns action key `{0}`")]
    UnknownActionKey(String),
    #[error("internal edges did not settle at time {time}")]
    Unstable { time: u32 },
}

impl CheckError {
    pub fn code(&self) -> &'static str {
        match self {
            CheckError::HorizonTooSmall { .. } => "HORIZON_TOO_SMALL",
            CheckError::StateLimit { .. } => "STATE_LIMIT",
            CheckError::UnknownActionKey(_) => "UNKNOWN_ACTION_KEY",
            CheckError::Unstable { .. } => "UNSTABLE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Satisfied,
    NotSatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawStep {
    Delay { to: u32 },
    Action { key: String, agent: Agent, action: Action, time: u32 },
    Internal { automaton: String, from: String, to: String, time: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub agent: Agent,
    pub action: Action,
    pub time: u32,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} at time {}", self.agent, self.action.label(), self.time)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AbstractTrace(pub Vec<TraceEntry>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Counterexample for a failed `A[]`, witness for a satisfied `E<>`.
    pub trace: Option<AbstractTrace>,
    pub raw_trace: Option<Vec<RawStep>>,
    pub states_explored: usize,
}

/// Keeps the action firings of a raw trace.
pub fn abstract_trace(raw: &[RawStep]) -> AbstractTrace {
    AbstractTrace(
        raw.iter()
            .filter_map(|s| match s {
                RawStep::Action { agent, action, time, .. } => {
                    Some(TraceEntry { agent: agent.clone(), action: action.clone(), time: *time })
                }
                _ => None,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    t: u32,
    locs: Box<[u8]>,
    vars: Box<[i32]>,
    /// Absolute time of each clock's last reset.
    stamps: Box<[u32]>,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Init,
    Action(usize),
    Delay,
}

struct Machine<'a> {
    net: &'a TaNetwork,
    var_live: Vec<bool>,
    clock_live: Vec<bool>,
    /// Internal edges by automaton and location.
    internal: Vec<Vec<Vec<usize>>>,
    /// Sender edges (automaton, edge) by channel.
    senders: Vec<Vec<(usize, usize)>>,
    /// Receiving edges by channel, automaton and location.
    receivers: Vec<Vec<(usize, Vec<Vec<usize>>)>>,
    max_rounds: usize,
}

impl<'a> Machine<'a> {
    fn new(net: &'a TaNetwork, prop: &Property) -> Self {
        let mut var_live = vec![false; net.vars.len()];
        let mut clock_live = vec![false; net.clocks.len()];
        let mut mark = |e: &Expr| {
            e.visit_vars(&mut |v| var_live[v] = true);
            e.visit_clocks(&mut |c| clock_live[c] = true);
        };
        for a in &net.automata {
            for e in &a.edges {
                mark(&e.guard);
            }
        }
        mark(&net.all_complete);
        let keys: Vec<usize> = prop.body.keys().into_iter().map(|k| net.key_index(k).expect("keys checked")).collect();
        for &k in &keys {
            mark(&net.conflicts[k]);
        }
        for &k in &keys {
            var_live[net.keys[k].done] = true;
            clock_live[net.keys[k].clock] = true;
        }
        let n_chan = net.keys.len();
        let mut internal = Vec::new();
        let mut senders = vec![Vec::new(); n_chan];
        let mut receivers: Vec<Vec<(usize, Vec<Vec<usize>>)>> = vec![Vec::new(); n_chan];
        for (ai, a) in net.automata.iter().enumerate() {
            let mut by_loc = vec![Vec::new(); a.locations.len()];
            let mut recv: HashMap<usize, Vec<Vec<usize>>> = HashMap::new();
            for (ei, e) in a.edges.iter().enumerate() {
                match e.sync {
                    None => by_loc[e.src].push(ei),
                    Some(s) if s.dir == SyncDir::Send => senders[s.channel].push((ai, ei)),
                    Some(s) => recv.entry(s.channel).or_insert_with(|| vec![Vec::new(); a.locations.len()])[e.src].push(ei),
                }
            }
            internal.push(by_loc);
            let mut recv: Vec<_> = recv.into_iter().collect();
            recv.sort_by_key(|(c, _)| *c);
            for (c, table) in recv {
                receivers[c].push((ai, table));
            }
        }
        Machine { net, var_live, clock_live, internal, senders, receivers, max_rounds: 4 * net.automata.len() + 4 }
    }

    fn initial(&self) -> State {
        State {
            t: 0,
            locs: self.net.automata.iter().map(|a| a.initial as u8).collect(),
            vars: vec![0; self.net.vars.len()].into(),
            stamps: vec![0; self.net.clocks.len()].into(),
        }
    }

    fn eval(&self, e: &Expr, s: &State) -> bool {
        match e {
            Expr::True => true,
            Expr::False => false,
            Expr::VarEq(v, value) => s.vars[*v] == *value,
            Expr::Clock(c, op, n) => {
                let value = if *c == T0 { s.t } else { s.t - s.stamps[*c] };
                op.holds(value, *n)
            }
            Expr::Not(inner) => !self.eval(inner, s),
            Expr::And(parts) => parts.iter().all(|p| self.eval(p, s)),
            Expr::Or(parts) => parts.iter().any(|p| self.eval(p, s)),
        }
    }

    fn prop(&self, p: &PropExpr, s: &State) -> bool {
        let key = |k: &str| self.net.key_index(k).expect("keys checked");
        match p {
            PropExpr::AllComplete => self.eval(&self.net.all_complete, s),
            PropExpr::IsDone(k) => s.vars[self.net.keys[key(k)].done] != 0,
            PropExpr::Conflict(k) => self.eval(&self.net.conflicts[key(k)], s),
            PropExpr::ClockDiffLt(k, n) => s.stamps[self.net.keys[key(k)].clock] < *n,
            PropExpr::Not(e) => !self.prop(e, s),
            PropExpr::And(a, b) => self.prop(a, s) && self.prop(b, s),
            PropExpr::Or(a, b) => self.prop(a, s) || self.prop(b, s),
            PropExpr::Implies(a, b) => !self.prop(a, s) || self.prop(b, s),
        }
    }

    fn apply(&self, s: &mut State, ai: usize, ei: usize) {
        let e = &self.net.automata[ai].edges[ei];
        s.locs[ai] = e.dst as u8;
        for &(v, value) in &e.updates {
            if self.var_live[v] {
                s.vars[v] = value;
            }
        }
        for &c in &e.resets {
            if self.clock_live[c] {
                s.stamps[c] = s.t;
            }
        }
    }

    fn settle(&self, s: &mut State, mut log: Option<&mut Vec<RawStep>>) -> Result<(), CheckError> {
        for _ in 0..self.max_rounds {
            let snap = s.clone();
            let mut moved = false;
            for (ai, by_loc) in self.internal.iter().enumerate() {
                let here = snap.locs[ai] as usize;
                if let Some(&ei) = by_loc[here].iter().find(|&&ei| self.eval(&self.net.automata[ai].edges[ei].guard, &snap)) {
                    self.apply(s, ai, ei);
                    moved = true;
                    if let Some(log) = log.as_deref_mut() {
                        let a = &self.net.automata[ai];
                        log.push(RawStep::Internal {
                            automaton: a.name.clone(),
                            from: a.locations[here].name.clone(),
                            to: a.locations[a.edges[ei].dst].name.clone(),
                            time: s.t,
                        });
                    }
                }
            }
            if !moved {
                return Ok(());
            }
        }
        Err(CheckError::Unstable { time: s.t })
    }

    /// Fires action `k` if some sender can; returns the settled successor.
    fn fire(&self, s: &State, k: usize, mut log: Option<&mut Vec<RawStep>>) -> Result<Option<State>, CheckError> {
        let Some(&(sa, se)) = self.senders[k].iter().find(|&&(ai, ei)| {
            let e = &self.net.automata[ai].edges[ei];
            e.src == s.locs[ai] as usize && self.eval(&e.guard, s)
        }) else {
            return Ok(None);
        };
        let mut next = s.clone();
        self.apply(&mut next, sa, se);
        for (ai, table) in &self.receivers[k] {
            let here = s.locs[*ai] as usize;
            if let Some(&ei) = table[here].iter().find(|&&ei| self.eval(&self.net.automata[*ai].edges[ei].guard, s)) {
                self.apply(&mut next, *ai, ei);
            }
        }
        if let Some(log) = log.as_deref_mut() {
            let info = &self.net.keys[k];
            log.push(RawStep::Action {
                key: info.key.as_str().to_string(),
                agent: info.agent.clone(),
                action: info.action.clone(),
                time: s.t,
            });
        }
        self.settle(&mut next, log)?;
        Ok(Some(next))
    }

    fn delay(&self, s: &State, horizon: u32, mut log: Option<&mut Vec<RawStep>>) -> Result<Option<State>, CheckError> {
        if s.t >= horizon {
            return Ok(None);
        }
        let mut next = s.clone();
        next.t += 1;
        if let Some(log) = log.as_deref_mut() {
            log.push(RawStep::Delay { to: next.t });
        }
        self.settle(&mut next, log)?;
        Ok(Some(next))
    }
}

pub fn check(net: &TaNetwork, prop: &Property, opts: CheckOptions) -> Result<Verdict, CheckError> {
    for k in prop.body.keys() {
        if net.key_index(k).is_none() {
            return Err(CheckError::UnknownActionKey(k.to_string()));
        }
    }
    let required = net.max_constant + 1;
    let horizon = opts.horizon.unwrap_or(required);
    if horizon < required {
        return Err(CheckError::HorizonTooSmall { horizon, required });
    }
    let m = Machine::new(net, prop);
    let mut init = m.initial();
    m.settle(&mut init, None)?;

    let mut arena: Vec<(State, usize, Step)> = vec![(init.clone(), 0, Step::Init)];
    let mut seen: HashMap<State, ()> = HashMap::new();
    seen.insert(init, ());
    let mut queue = VecDeque::from([0usize]);
    let looking_for = prop.quantifier == Quantifier::Eventually;
    let mut found = None;
    while let Some(i) = queue.pop_front() {
        let state = arena[i].0.clone();
        if m.prop(&prop.body, &state) == looking_for {
            found = Some(i);
            break;
        }
        let mut push = |next: State, step: Step| -> Result<(), CheckError> {
            if seen.contains_key(&next) {
                return Ok(());
            }
            if arena.len() >= opts.state_limit {
                return Err(CheckError::StateLimit { limit: opts.state_limit });
            }
            seen.insert(next.clone(), ());
            arena.push((next, i, step));
            queue.push_back(arena.len() - 1);
            Ok(())
        };
        for k in 0..net.keys.len() {
            if let Some(next) = m.fire(&state, k, None)? {
                push(next, Step::Action(k))?;
            }
        }
        if let Some(next) = m.delay(&state, horizon, None)? {
            push(next, Step::Delay)?;
        }
    }
    let states_explored = arena.len();
    let outcome = match (looking_for, found.is_some()) {
        (true, true) | (false, false) => Outcome::Satisfied,
        _ => Outcome::NotSatisfied,
    };
    let Some(end) = found else {
        return Ok(Verdict { outcome, trace: None, raw_trace: None, states_explored });
    };

    let mut steps = Vec::new();
    let mut i = end;
    while i != 0 {
        steps.push(arena[i].2);
        i = arena[i].1;
    }
    steps.reverse();
    let mut raw = Vec::new();
    let mut s = m.initial();
    m.settle(&mut s, Some(&mut raw))?;
    for step in steps {
        s = match step {
            Step::Action(k) => m.fire(&s, k, Some(&mut raw))?,
            Step::Delay => m.delay(&s, horizon, Some(&mut raw))?,
            Step::Init => unreachable!("only the root is Init"),
        }
        .expect("replayed step is enabled");
    }
    debug_assert_eq!(s, arena[end].0);
    Ok(Verdict { outcome, trace: Some(abstract_trace(&raw)), raw_trace: Some(raw), states_explored })
}
