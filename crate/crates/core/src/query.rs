//! Query templates over a contract model.
//!
//! Templates 1-6 are answered by filtering atomic clauses with a predicate;
//! 7-10 are translated to a timed-automata property and model checked.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{check, CheckError, CheckOptions, Outcome, Verdict};
use crate::contract::{collect_actions, collect_agents, Action, Agent, Atomic, Clause, ClauseBody, ContractModel, Guard, Modality};
use crate::nta::{encode_property, translate, NtaError, Property, Quantifier, SemanticQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Syntactic,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Agent,
    Action,
    Number,
    Clause,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::Agent => "agent",
            Slot::Action => "action",
            Slot::Number => "number",
            Slot::Clause => "clause",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryTemplate {
    pub id: u32,
    pub kind: QueryKind,
    /// English sentence with `{slot}` placeholders.
    pub sentence: &'static str,
    pub slots: Vec<Slot>,
}

pub fn list_templates() -> Vec<QueryTemplate> {
    use QueryKind::*;
    use Slot::*;
    let t = |id, kind, sentence, slots: &[Slot]| QueryTemplate { id, kind, sentence, slots: slots.to_vec() };
    vec![
        t(1, Syntactic, "What are the obligations of {agent}?", &[Agent]),
        t(2, Syntactic, "What are the permissions of {agent}?", &[Agent]),
        t(3, Syntactic, "What are the prohibitions of {agent}?", &[Agent]),
        t(4, Syntactic, "Who must or may {action}?", &[Action]),
        t(5, Syntactic, "Which clauses have reparations?", &[]),
        t(6, Syntactic, "Which clauses are guarded by {clause}?", &[Clause]),
        t(7, Semantic, "The {agent} must {action} before time {number}.", &[Agent, Action, Number]),
        t(8, Semantic, "Can {agent} avoid {action} and still complete the contract?", &[Agent, Action]),
        t(9, Semantic, "Can the whole contract be completed?", &[]),
        t(10, Semantic, "Is {action} by {agent} ever simultaneously obliged and forbidden?", &[Action, Agent]),
    ]
}

pub fn template(id: u32) -> Result<QueryTemplate, QueryError> {
    list_templates().into_iter().find(|t| t.id == id).ok_or(QueryError::UnknownTemplate(id))
}

/// Possible values for each slot of a template, sorted. Number slots have
/// no completions.
pub fn complete_slots(model: &ContractModel, id: u32) -> Result<BTreeMap<String, Vec<String>>, QueryError> {
    let t = template(id)?;
    Ok(t.slots.iter().map(|&s| (s.name().to_string(), slot_values(model, s))).collect())
}

fn slot_values(model: &ContractModel, slot: Slot) -> Vec<String> {
    let set: BTreeSet<String> = match slot {
        Slot::Agent => collect_agents(model).iter().map(ToString::to_string).collect(),
        Slot::Action => collect_actions(model).iter().map(Action::label).collect(),
        Slot::Clause => model.all_clauses().iter().map(|r| r.clause.name.clone()).collect(),
        Slot::Number => BTreeSet::new(),
    };
    set.into_iter().collect()
}

/// A binding value; numbers may be given as JSON numbers or strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Number(u64),
    Text(String),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Number(n) => write!(f, "{n}"),
            Binding::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryInstance {
    pub template: u32,
    #[serde(default)]
    pub bindings: BTreeMap<String, Binding>,
}

impl QueryInstance {
    pub fn new(template: u32) -> Self {
        QueryInstance { template, bindings: BTreeMap::new() }
    }

    pub fn bind(mut self, slot: &str, value: impl Into<String>) -> Self {
        self.bindings.insert(slot.to_string(), Binding::Text(value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("no query template {0}")]
    UnknownTemplate(u32),
    #[error("slot `{0}` is not bound")]
    MissingBinding(String),
    #[error("`{0}` is not an agent of this contract")]
    UnknownAgent(String),
    #[error("`{0}` is not an action of this contract")]
    UnknownAction(String),
    #[error("`{0}` is not a clause of this contract")]
    UnknownClause(String),
    #[error("`{0}` is not a natural number")]
    BadNumber(String),
    #[error("template {0} is not {1}")]
    WrongKind(u32, &'static str),
    #[error(transparent)]
    Translate(#[from] NtaError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::UnknownTemplate(_) => "UNKNOWN_TEMPLATE",
            QueryError::MissingBinding(_) => "MISSING_BINDING",
            QueryError::UnknownAgent(_) => "UNKNOWN_AGENT",
            QueryError::UnknownAction(_) => "UNKNOWN_ACTION",
            QueryError::UnknownClause(_) => "UNKNOWN_CLAUSE",
            QueryError::BadNumber(_) => "BAD_NUMBER",
            QueryError::WrongKind(..) => "WRONG_QUERY_KIND",
            QueryError::Translate(e) => e.code(),
            QueryError::Check(e) => e.code(),
        }
    }
}

struct Bound<'a> {
    model: &'a ContractModel,
    instance: &'a QueryInstance,
}

impl Bound<'_> {
    fn raw(&self, slot: &str) -> Result<String, QueryError> {
        self.instance.bindings.get(slot).map(ToString::to_string).ok_or_else(|| QueryError::MissingBinding(slot.into()))
    }

    fn agent(&self) -> Result<Agent, QueryError> {
        let raw = self.raw("agent")?;
        Agent::normalize(&raw)
            .ok()
            .filter(|a| collect_agents(self.model).contains(a))
            .ok_or(QueryError::UnknownAgent(raw))
    }

    fn action(&self) -> Result<Action, QueryError> {
        let raw = self.raw("action")?;
        Action::from_phrase(&raw.to_lowercase())
            .ok()
            .filter(|a| collect_actions(self.model).contains(a))
            .ok_or(QueryError::UnknownAction(raw))
    }

    fn clause(&self) -> Result<String, QueryError> {
        let raw = self.raw("clause")?;
        match self.model.all_clauses().iter().any(|r| r.clause.name == raw) {
            true => Ok(raw),
            false => Err(QueryError::UnknownClause(raw)),
        }
    }

    fn number(&self) -> Result<u32, QueryError> {
        let raw = self.raw("number")?;
        raw.trim().parse().map_err(|_| QueryError::BadNumber(raw))
    }
}

// ---------------------------------------------------------------- syntactic

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    IsObl,
    IsPerm,
    IsForb,
    AgentOf(Agent),
    ActionOf(Action),
    HasReparation,
    HasTimeConstraint,
    GuardedBy(String),
    And(Vec<Predicate>),
}

/// An atomic clause in context: guards and reparations of enclosing
/// composites apply to it too.
#[derive(Debug, Clone)]
pub struct AtomicView<'a> {
    pub name: &'a str,
    pub atomic: &'a Atomic,
    pub guards: Vec<&'a Guard>,
    pub reparations: Vec<&'a str>,
}

/// Atomic clauses of the contract body (reparations excluded) in document order.
pub fn atomic_views(model: &ContractModel) -> Vec<AtomicView<'_>> {
    fn walk<'a>(c: &'a Clause, guards: &mut Vec<&'a Guard>, reps: &mut Vec<&'a str>, out: &mut Vec<AtomicView<'a>>) {
        let g = c.guard().is_some();
        let r = c.reparation().is_some();
        guards.extend(c.guard());
        reps.extend(c.reparation());
        match &c.body {
            ClauseBody::Atomic(a) => {
                out.push(AtomicView { name: &c.name, atomic: a, guards: guards.clone(), reparations: reps.clone() })
            }
            ClauseBody::Composite(comp) => comp.children.iter().for_each(|k| walk(k, guards, reps, out)),
            ClauseBody::Declaration(_) => {}
        }
        if g {
            guards.pop();
        }
        if r {
            reps.pop();
        }
    }
    let mut out = Vec::new();
    for c in &model.clauses {
        walk(c, &mut Vec::new(), &mut Vec::new(), &mut out);
    }
    out
}

impl Predicate {
    pub fn holds(&self, v: &AtomicView<'_>) -> bool {
        match self {
            Predicate::IsObl => v.atomic.modality == Modality::Obligation,
            Predicate::IsPerm => v.atomic.modality == Modality::Permission,
            Predicate::IsForb => v.atomic.modality == Modality::Prohibition,
            Predicate::AgentOf(a) => &v.atomic.agent == a,
            Predicate::ActionOf(a) => &v.atomic.action == a,
            Predicate::HasReparation => !v.reparations.is_empty(),
            Predicate::HasTimeConstraint => v.atomic.time.is_some(),
            Predicate::GuardedBy(c) => v.guards.iter().any(|g| g.references().contains(&c.as_str())),
            Predicate::And(ps) => ps.iter().all(|p| p.holds(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub matches: Vec<String>,
    pub answer: String,
}

fn stem(id: u32, b: &Bound<'_>) -> Result<(Predicate, String), QueryError> {
    Ok(match id {
        1 => {
            let a = b.agent()?;
            let s = format!("The following are obligations of {a}:");
            (Predicate::And(vec![Predicate::IsObl, Predicate::AgentOf(a)]), s)
        }
        2 => {
            let a = b.agent()?;
            let s = format!("The following are permissions of {a}:");
            (Predicate::And(vec![Predicate::IsPerm, Predicate::AgentOf(a)]), s)
        }
        3 => {
            let a = b.agent()?;
            let s = format!("The following are prohibitions of {a}:");
            (Predicate::And(vec![Predicate::IsForb, Predicate::AgentOf(a)]), s)
        }
        4 => {
            let x = b.action()?;
            let s = format!("The following clauses concern {}:", x.label());
            (Predicate::ActionOf(x), s)
        }
        5 => (Predicate::HasReparation, "The following clauses have reparations:".to_string()),
        6 => {
            let c = b.clause()?;
            let s = format!("The following clauses are guarded by {c}:");
            (Predicate::GuardedBy(c), s)
        }
        other => return Err(QueryError::WrongKind(other, "syntactic")),
    })
}

/// Up to two items inline, three or more as a bulleted list.
pub fn phrase(stem: &str, items: &[String]) -> String {
    match items {
        [] => "There are none.".to_string(),
        [one] => format!("{stem} {one}."),
        [a, b] => format!("{stem} {a} and {b}."),
        many => {
            let mut s = stem.to_string();
            for item in many {
                s.push_str("\n- ");
                s.push_str(item);
            }
            s
        }
    }
}

pub fn run_syntactic(model: &ContractModel, instance: &QueryInstance) -> Result<QueryResult, QueryError> {
    let t = template(instance.template)?;
    if t.kind != QueryKind::Syntactic {
        return Err(QueryError::WrongKind(t.id, "syntactic"));
    }
    let b = Bound { model, instance };
    let (pred, stem) = stem(t.id, &b)?;
    let hits: Vec<AtomicView<'_>> = atomic_views(model).into_iter().filter(|v| pred.holds(v)).collect();
    let items: Vec<String> = hits
        .iter()
        .map(|v| match t.id {
            1..=3 => v.atomic.action.label(),
            _ => {
                let modal = match v.atomic.modality {
                    Modality::Obligation => "must",
                    Modality::Permission => "may",
                    Modality::Prohibition => "must not",
                };
                format!("{} {modal} {}", v.atomic.agent, v.atomic.action.label())
            }
        })
        .collect();
    Ok(QueryResult { matches: hits.iter().map(|v| v.name.to_string()).collect(), answer: phrase(&stem, &items) })
}

// ---------------------------------------------------------------- semantic

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticResult {
    pub property: Property,
    pub verdict: Verdict,
    pub answer: String,
}

pub fn semantic_query(model: &ContractModel, instance: &QueryInstance) -> Result<SemanticQuery, QueryError> {
    let t = template(instance.template)?;
    let b = Bound { model, instance };
    Ok(match t.id {
        7 => SemanticQuery::MustBefore { agent: b.agent()?, action: b.action()?, bound: b.number()? },
        8 => SemanticQuery::CanAvoid { agent: b.agent()?, action: b.action()? },
        9 => SemanticQuery::Completable,
        10 => SemanticQuery::NoConflict { agent: b.agent()?, action: b.action()? },
        other => return Err(QueryError::WrongKind(other, "semantic")),
    })
}

pub fn run_semantic(model: &ContractModel, instance: &QueryInstance, opts: CheckOptions) -> Result<SemanticResult, QueryError> {
    let q = semantic_query(model, instance)?;
    let net = translate(model)?;
    let property = encode_property(&q, &net)?;
    let verdict = check(&net, &property, opts)?;
    let answer = render_verdict(&verdict, property.quantifier);
    Ok(SemanticResult { property, verdict, answer })
}

pub fn render_verdict(v: &Verdict, q: Quantifier) -> String {
    let mut s = match v.outcome {
        Outcome::Satisfied => "Satisfied".to_string(),
        Outcome::NotSatisfied => "NOT Satisfied".to_string(),
    };
    if let Some(trace) = &v.trace {
        let what = match q {
            Quantifier::Always => "violated",
            Quantifier::Eventually => "witnessed",
        };
        if trace.0.is_empty() {
            s.push_str(&format!("\nThe property is {what} without any action being performed."));
        } else {
            s.push_str(&format!("\nThe property is {what} by the following action sequence:"));
            for e in &trace.0 {
                s.push_str(&format!("\n- {e}"));
            }
        }
    }
    s
}
