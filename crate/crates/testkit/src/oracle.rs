//! Brute-force reference semantics for contract models.
//!
//! Works on the contract model directly, with no timed automata: a state is
//! the global time, every clause's status and activation time, and for each
//! action key whether and when it last happened. Every schedule of actions
//! and unit delays up to the horizon is enumerated depth first, without
//! sharing states, and the property is evaluated on each settled state.

use std::collections::BTreeMap;

use norma_core::checker::AbstractTrace;
use norma_core::contract::{Clause, ClauseBody, Connective, ContractModel, Guard, Modality, TimeExpr};
use norma_core::nta::{PropExpr, Property, Quantifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Inactive,
    Enabled,
    Done,
    Violated,
}
use Status::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// Status updates kept changing without reaching a fixpoint.
    Unstable,
    /// More schedules than the given budget.
    Budget,
    UnknownKey(String),
}

enum Kind {
    Atomic { key: usize, modality: Modality, time: Option<TimeExpr> },
    Decl { time: Option<TimeExpr> },
    Comp { connective: Connective, children: Vec<usize> },
}

struct Node {
    parent: Option<usize>,
    index: usize,
    top_level: bool,
    in_reparations: bool,
    guard: Option<Guard>,
    reparation: Option<usize>,
    kind: Kind,
}

pub struct Contract {
    nodes: Vec<Node>,
    names: BTreeMap<String, usize>,
    keys: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
struct State {
    t: u32,
    status: Vec<Status>,
    since: Vec<u32>,
    done: Vec<bool>,
    last: Vec<u32>,
}

impl Contract {
    pub fn new(model: &ContractModel) -> Self {
        let mut c = Contract { nodes: Vec::new(), names: BTreeMap::new(), keys: BTreeMap::new() };
        let mut raw = Vec::new();
        for cl in &model.clauses {
            flatten(cl, None, 0, true, false, &mut raw);
        }
        for cl in &model.reparations {
            flatten(cl, None, 0, false, true, &mut raw);
        }
        for (i, (cl, ..)) in raw.iter().enumerate() {
            c.names.insert(cl.name.clone(), i);
            if let ClauseBody::Atomic(a) = &cl.body {
                let n = c.keys.len();
                c.keys.entry(a.key().as_str().to_string()).or_insert(n);
            }
        }
        // key numbering by name, like any other consistent choice
        let sorted: Vec<String> = c.keys.keys().cloned().collect();
        c.keys = sorted.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
        for &(cl, parent, index, top_level, in_reparations) in &raw {
            let kind = match &cl.body {
                ClauseBody::Atomic(a) => Kind::Atomic { key: c.keys[a.key().as_str()], modality: a.modality, time: a.time.clone() },
                ClauseBody::Declaration(d) => Kind::Decl { time: d.time.clone() },
                ClauseBody::Composite(k) => Kind::Comp {
                    connective: k.connective,
                    children: k.children.iter().map(|ch| c.names[&ch.name]).collect(),
                },
            };
            c.nodes.push(Node {
                parent: parent.map(|p: &Clause| c.names[&p.name]),
                index,
                top_level,
                in_reparations,
                guard: cl.guard().cloned(),
                reparation: cl.reparation().map(|r| c.names[r]),
                kind,
            });
        }
        c
    }

    fn initial(&self) -> State {
        State {
            t: 0,
            status: vec![Inactive; self.nodes.len()],
            since: vec![0; self.nodes.len()],
            done: vec![false; self.keys.len()],
            last: vec![0; self.keys.len()],
        }
    }

    fn succeeded(&self, s: &State, i: usize) -> bool {
        match s.status[i] {
            Done => true,
            Violated => self.nodes[i].reparation.is_some_and(|r| self.succeeded(s, r)),
            _ => false,
        }
    }

    fn failed(&self, s: &State, i: usize) -> bool {
        s.status[i] == Violated && self.nodes[i].reparation.is_none_or(|r| self.failed(s, r))
    }

    fn status_of(&self, s: &State, name: &str) -> Status {
        s.status[self.names[name]]
    }

    /// Some(true) if the guard holds for sure, Some(false) if it can no
    /// longer hold, None while undecided.
    fn guard(&self, s: &State, g: &Guard) -> Option<bool> {
        match g {
            Guard::Done(x) => match self.status_of(s, x) {
                Done => Some(true),
                Violated => Some(false),
                _ => None,
            },
            Guard::Violated(x) => match self.status_of(s, x) {
                Violated => Some(true),
                Done => Some(false),
                _ => None,
            },
            Guard::Not(a) => self.guard(s, a).map(|v| !v),
            Guard::And(a, b) => match (self.guard(s, a), self.guard(s, b)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Guard::Or(a, b) => match (self.guard(s, a), self.guard(s, b)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    fn active(&self, s: &State, i: usize) -> bool {
        let n = &self.nodes[i];
        match n.parent {
            None if n.in_reparations => (0..self.nodes.len()).any(|j| self.nodes[j].reparation == Some(i) && s.status[j] == Violated),
            None => true,
            Some(p) => {
                if s.status[p] != Enabled {
                    return false;
                }
                match &self.nodes[p].kind {
                    Kind::Comp { connective: Connective::Sequence, children } if n.index > 0 => self.succeeded(s, children[n.index - 1]),
                    _ => true,
                }
            }
        }
    }

    /// Elapsed time on the window's clock, if that clock is running.
    fn clock(&self, s: &State, t: &TimeExpr) -> Option<u32> {
        match &t.reference {
            None => Some(s.t),
            Some(r) => {
                let i = self.names[r];
                (s.status[i] != Inactive).then(|| s.t - s.since[i])
            }
        }
    }

    fn window_open(&self, s: &State, t: Option<&TimeExpr>) -> bool {
        let Some(t) = t else { return true };
        let Some(x) = self.clock(s, t) else { return false };
        t.low.is_none_or(|l| x >= l) && t.high.is_none_or(|h| if t.strict { x < h } else { x <= h })
    }

    fn window_closed(&self, s: &State, t: Option<&TimeExpr>) -> bool {
        let Some(t) = t else { return false };
        let (Some(h), Some(x)) = (t.high, self.clock(s, t)) else { return false };
        if t.strict { x >= h } else { x > h }
    }

    /// The status clause `i` moves to on its own, given the state.
    fn next_status(&self, s: &State, i: usize) -> Option<Status> {
        let n = &self.nodes[i];
        match s.status[i] {
            Inactive => {
                if !self.active(s, i) {
                    return None;
                }
                match n.guard.as_ref().map(|g| self.guard(s, g)) {
                    None | Some(Some(true)) => Some(Enabled),
                    Some(Some(false)) => Some(Done),
                    Some(None) => None,
                }
            }
            Enabled => {
                if let Some(p) = n.parent {
                    let choice = matches!(self.nodes[p].kind, Kind::Comp { connective: Connective::Choice, .. });
                    if s.status[p] == Inactive || (choice && matches!(s.status[p], Done | Violated)) {
                        return Some(Inactive);
                    }
                }
                match &n.kind {
                    Kind::Atomic { modality, time, .. } => self
                        .window_closed(s, time.as_ref())
                        .then_some(if *modality == Modality::Obligation { Violated } else { Done }),
                    Kind::Decl { time } => {
                        let reached = match time {
                            None => true,
                            Some(t) => self.clock(s, t).is_some_and(|x| t.low.is_none_or(|l| x >= l)),
                        };
                        reached.then_some(Done)
                    }
                    Kind::Comp { connective, children } => {
                        let any_failed = children.iter().any(|&k| self.failed(s, k));
                        let all_failed = children.iter().all(|&k| self.failed(s, k));
                        let any_ok = children.iter().any(|&k| self.succeeded(s, k));
                        let all_ok = children.iter().all(|&k| self.succeeded(s, k));
                        match connective {
                            Connective::Conjunction if any_failed => Some(Violated),
                            Connective::Conjunction if all_ok => Some(Done),
                            Connective::Sequence if any_failed => Some(Violated),
                            Connective::Sequence if self.succeeded(s, *children.last().unwrap()) => Some(Done),
                            Connective::Choice if any_ok => Some(Done),
                            Connective::Choice if all_failed => Some(Violated),
                            _ => None,
                        }
                    }
                }
            }
            Done | Violated => None,
        }
    }

    /// Applies simultaneous status updates until none applies.
    fn settle(&self, s: &mut State) -> Result<(), OracleError> {
        for _ in 0..10 * self.nodes.len() + 10 {
            let moves: Vec<(usize, Status)> = (0..self.nodes.len()).filter_map(|i| self.next_status(s, i).map(|st| (i, st))).collect();
            if moves.is_empty() {
                return Ok(());
            }
            for (i, st) in moves {
                if st == Enabled {
                    s.since[i] = s.t;
                }
                s.status[i] = st;
            }
        }
        Err(OracleError::Unstable)
    }

    /// Clauses on which performing action `k` now counts.
    fn receivers(&self, s: &State, k: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| match &self.nodes[i].kind {
                Kind::Atomic { key, time, .. } => *key == k && s.status[i] == Enabled && self.window_open(s, time.as_ref()),
                _ => false,
            })
            .collect()
    }

    fn perform(&self, s: &State, k: usize) -> Result<Option<State>, OracleError> {
        let hit = self.receivers(s, k);
        if hit.is_empty() {
            return Ok(None);
        }
        let mut next = s.clone();
        next.done[k] = true;
        next.last[k] = s.t;
        for i in hit {
            let Kind::Atomic { modality, .. } = self.nodes[i].kind else { unreachable!() };
            next.status[i] = if modality == Modality::Prohibition { Violated } else { Done };
        }
        self.settle(&mut next)?;
        Ok(Some(next))
    }

    fn key(&self, k: &str) -> Result<usize, OracleError> {
        self.keys.get(k).copied().ok_or_else(|| OracleError::UnknownKey(k.to_string()))
    }

    fn holds(&self, s: &State, p: &PropExpr) -> Result<bool, OracleError> {
        Ok(match p {
            PropExpr::AllComplete => (0..self.nodes.len()).filter(|&i| self.nodes[i].top_level).all(|i| self.succeeded(s, i)),
            PropExpr::IsDone(k) => s.done[self.key(k)?],
            PropExpr::ClockDiffLt(k, n) => s.last[self.key(k)?] < *n,
            PropExpr::Conflict(k) => {
                let k = self.key(k)?;
                let enabled = |m: Modality| {
                    (0..self.nodes.len()).any(|i| {
                        s.status[i] == Enabled && matches!(self.nodes[i].kind, Kind::Atomic { key, modality, .. } if key == k && modality == m)
                    })
                };
                enabled(Modality::Obligation) && enabled(Modality::Prohibition)
            }
            PropExpr::Not(a) => !self.holds(s, a)?,
            PropExpr::And(a, b) => self.holds(s, a)? && self.holds(s, b)?,
            PropExpr::Or(a, b) => self.holds(s, a)? || self.holds(s, b)?,
            PropExpr::Implies(a, b) => !self.holds(s, a)? || self.holds(s, b)?,
        })
    }
}

fn flatten<'a>(
    c: &'a Clause,
    parent: Option<&'a Clause>,
    index: usize,
    top_level: bool,
    in_reparations: bool,
    out: &mut Vec<(&'a Clause, Option<&'a Clause>, usize, bool, bool)>,
) {
    out.push((c, parent, index, top_level, in_reparations));
    for (i, k) in c.children().iter().enumerate() {
        flatten(k, Some(c), i, false, in_reparations, out);
    }
}

struct Search<'a> {
    c: &'a Contract,
    prop: &'a PropExpr,
    horizon: u32,
    budget: usize,
}

impl Search<'_> {
    /// Whether some schedule from `s` reaches a state where the body
    /// evaluates to `target`.
    fn reach(&mut self, s: &State, target: bool) -> Result<bool, OracleError> {
        if self.budget == 0 {
            return Err(OracleError::Budget);
        }
        self.budget -= 1;
        if self.c.holds(s, self.prop)? == target {
            return Ok(true);
        }
        for k in 0..self.c.keys.len() {
            if let Some(next) = self.c.perform(s, k)? {
                if self.reach(&next, target)? {
                    return Ok(true);
                }
            }
        }
        if s.t < self.horizon {
            let mut next = s.clone();
            next.t += 1;
            self.c.settle(&mut next)?;
            return self.reach(&next, target);
        }
        Ok(false)
    }
}

/// Decides the property by enumerating every schedule up to `horizon`.
/// `budget` caps the number of visited schedule prefixes.
pub fn decide(model: &ContractModel, prop: &Property, horizon: u32, budget: usize) -> Result<bool, OracleError> {
    let c = Contract::new(model);
    let mut s = c.initial();
    c.settle(&mut s)?;
    let mut search = Search { c: &c, prop: &prop.body, horizon, budget };
    Ok(match prop.quantifier {
        Quantifier::Eventually => search.reach(&s, true)?,
        Quantifier::Always => !search.reach(&s, false)?,
    })
}

/// Whether the actions of `trace` can be performed in order at their
/// stated times.
pub fn feasible(model: &ContractModel, trace: &AbstractTrace) -> Result<bool, OracleError> {
    let c = Contract::new(model);
    let mut s = c.initial();
    c.settle(&mut s)?;
    for e in &trace.0 {
        if e.time < s.t {
            return Ok(false);
        }
        while s.t < e.time {
            s.t += 1;
            c.settle(&mut s)?;
        }
        let key = norma_core::contract::ActionKey::new(&e.agent, &e.action);
        let k = c.key(key.as_str())?;
        match c.perform(&s, k)? {
            Some(next) => s = next,
            None => return Ok(false),
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use norma_core::contract::{Action, Agent};

    fn pay(name: &str, m: Modality) -> Clause {
        Clause::atomic(name, Agent::new("alice").unwrap(), m, Action::from_phrase("pay").unwrap())
    }

    fn prop(q: Quantifier, body: PropExpr) -> Property {
        Property { quantifier: q, body }
    }

    #[test]
    fn obligation_with_deadline() {
        let mut m = ContractModel::new("");
        m.clauses.push(pay("c1", Modality::Obligation).with_time(TimeExpr::by(3)));
        let done = PropExpr::IsDone("alice_pay".into());
        assert!(decide(&m, &prop(Quantifier::Eventually, PropExpr::AllComplete), 4, 1 << 20).unwrap());
        assert!(!decide(&m, &prop(Quantifier::Always, PropExpr::implies(PropExpr::AllComplete, PropExpr::ClockDiffLt("alice_pay".into(), 3))), 4, 1 << 20).unwrap());
        assert!(decide(&m, &prop(Quantifier::Always, PropExpr::implies(PropExpr::AllComplete, done)), 4, 1 << 20).unwrap());
    }

    #[test]
    fn conflict_needs_both_enabled() {
        let mut m = ContractModel::new("");
        m.clauses.push(pay("c1", Modality::Obligation));
        m.clauses.push(pay("c2", Modality::Prohibition).with_time(TimeExpr::from(2)));
        let conflict = PropExpr::Conflict("alice_pay".into());
        assert!(decide(&m, &prop(Quantifier::Eventually, conflict.clone()), 3, 1 << 20).unwrap());
        assert_eq!(decide(&m, &prop(Quantifier::Eventually, PropExpr::IsDone("nobody".into())), 3, 10), Err(OracleError::UnknownKey("nobody".into())));
    }

    #[test]
    fn trace_feasibility() {
        use norma_core::checker::TraceEntry;
        let mut m = ContractModel::new("");
        m.clauses.push(pay("c1", Modality::Obligation).with_time(TimeExpr::between(2, 4)));
        let entry = |time| TraceEntry { agent: Agent::new("alice").unwrap(), action: Action::from_phrase("pay").unwrap(), time };
        assert!(feasible(&m, &AbstractTrace(vec![entry(3)])).unwrap());
        assert!(!feasible(&m, &AbstractTrace(vec![entry(1)])).unwrap());
        assert!(!feasible(&m, &AbstractTrace(vec![entry(3), entry(4)])).unwrap());
    }
}
