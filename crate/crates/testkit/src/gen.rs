//! Proptest strategies for contract models and clause tables.
//!
//! Models are drawn as unnamed shapes whose cross references are plain
//! indices, then named and wired up so every generated model validates.

use std::collections::{HashMap, HashSet};

use norma_core::contract::{validate, Action, Agent, Clause, ClauseBody, Connective, ContractModel, Guard, Modality, TimeExpr};
use norma_core::nta::{PropExpr, Property, Quantifier};
use norma_core::tsv::{ClauseRow, RowConnective, RowModality, TsvTable};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_atomic: usize,
    pub max_const: u32,
    pub agents: Vec<&'static str>,
    pub actions: Vec<&'static str>,
    /// Free text with punctuation and markup characters in titles and
    /// declarations; plain words otherwise.
    pub rich_text: bool,
    pub max_body: usize,
    pub max_reparations: usize,
}

impl GenConfig {
    /// Small models for exhaustive checking.
    pub fn small() -> Self {
        GenConfig {
            max_atomic: 4,
            max_const: 10,
            agents: vec!["alice", "bob"],
            actions: vec!["pay", "ship goods", "sign"],
            rich_text: false,
            max_body: 3,
            max_reparations: 1,
        }
    }

    /// Larger models for format round trips.
    pub fn wide() -> Self {
        GenConfig {
            max_atomic: 10,
            max_const: 100,
            agents: vec!["student", "grader", "a", "party_2"],
            actions: vec!["pay", "register for course", "sign up for exam", "x", "hand in 2 copies", "do_it now"],
            rich_text: true,
            max_body: 4,
            max_reparations: 2,
        }
    }
}

#[derive(Debug, Clone)]
enum GuardSpec {
    Done(usize),
    Violated(usize),
    Not(Box<GuardSpec>),
    And(Box<GuardSpec>, Box<GuardSpec>),
    Or(Box<GuardSpec>, Box<GuardSpec>),
}

#[derive(Debug, Clone)]
struct TimeSpec {
    low: Option<u32>,
    high: Option<u32>,
    strict: bool,
    reference: Option<usize>,
}

#[derive(Debug, Clone)]
enum Shape {
    Atomic { agent: usize, action: usize, modality: Modality, time: Option<TimeSpec>, guard: Option<GuardSpec>, rep: Option<usize> },
    Decl { text: String, time: Option<TimeSpec> },
    Comp { connective: Connective, children: Vec<Shape>, guard: Option<GuardSpec>, rep: Option<usize> },
}

fn guard_spec() -> impl Strategy<Value = GuardSpec> {
    let leaf = prop_oneof![any::<usize>().prop_map(GuardSpec::Done), any::<usize>().prop_map(GuardSpec::Violated)];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|g| GuardSpec::Not(Box::new(g))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| GuardSpec::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| GuardSpec::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn time_spec(max: u32) -> impl Strategy<Value = TimeSpec> {
    (
        proptest::option::of(0..=max),
        proptest::option::of(0..=max),
        any::<bool>(),
        proptest::option::weighted(0.25, any::<usize>()),
    )
        .prop_map(move |(low, high, strict, reference)| {
            let (mut low, mut high) = (low, high);
            if low.is_none() && high.is_none() {
                high = Some(max / 2);
            }
            if let (Some(l), Some(h)) = (low, high) {
                if l > h {
                    (low, high) = (Some(h), Some(l));
                }
            }
            TimeSpec { low, high, strict: strict && high.is_some(), reference }
        })
}

fn modality() -> impl Strategy<Value = Modality> {
    prop_oneof![Just(Modality::Obligation), Just(Modality::Permission), Just(Modality::Prohibition)]
}

fn connective() -> impl Strategy<Value = Connective> {
    prop_oneof![Just(Connective::Conjunction), Just(Connective::Choice), Just(Connective::Sequence)]
}

/// Declaration texts and titles.
pub fn text(rich: bool) -> BoxedStrategy<String> {
    if rich {
        "[a-zA-Z0-9(),.;:!?&<>\"'\\\\/#é-]{1,8}( [a-zA-Z0-9(),.;:!?&<>\"'\\\\/#é-]{1,8}){0,3}".boxed()
    } else {
        "[a-z]{1,6}( [a-z]{1,6}){0,2}".boxed()
    }
}

fn shape(cfg: &GenConfig) -> impl Strategy<Value = Shape> {
    let (na, nx, max) = (cfg.agents.len(), cfg.actions.len(), cfg.max_const);
    let atomic = (
        0..na,
        0..nx,
        modality(),
        proptest::option::weighted(0.7, time_spec(max)),
        proptest::option::weighted(0.3, guard_spec()),
        proptest::option::weighted(0.25, any::<usize>()),
    )
        .prop_map(|(agent, action, modality, time, guard, rep)| Shape::Atomic { agent, action, modality, time, guard, rep });
    let decl = (text(cfg.rich_text), proptest::option::weighted(0.8, time_spec(max))).prop_map(|(text, time)| Shape::Decl { text, time });
    let leaf = prop_oneof![4 => atomic, 1 => decl];
    leaf.prop_recursive(2, 8, 3, |inner| {
        (
            connective(),
            proptest::collection::vec(inner, 2..=3),
            proptest::option::weighted(0.25, guard_spec()),
            proptest::option::weighted(0.2, any::<usize>()),
        )
            .prop_map(|(connective, children, guard, rep)| Shape::Comp { connective, children, guard, rep })
    })
}

pub fn model(cfg: GenConfig) -> impl Strategy<Value = ContractModel> {
    let body = proptest::collection::vec(shape(&cfg), 1..=cfg.max_body);
    let reps = proptest::collection::vec(shape(&cfg), 0..=cfg.max_reparations);
    let prefix = prop_oneof![Just("c"), Just("r"), Just("clause_"), Just("X")];
    (body, reps, text(cfg.rich_text), any::<bool>(), prefix)
        .prop_map(move |(body, reps, title, titled, prefix)| build(&cfg, &body, &reps, if titled { title } else { String::new() }, prefix))
}

struct Namer<'a> {
    cfg: &'a GenConfig,
    prefix: &'a str,
    count: usize,
    atomics: usize,
}

impl Namer<'_> {
    /// Names the clauses in document order; references stay unresolved.
    fn clause(&mut self, s: &Shape) -> (Clause, Vec<Pending>) {
        let name = format!("{}{}", self.prefix, self.count);
        self.count += 1;
        let mut pending = Vec::new();
        let clause = match s {
            Shape::Atomic { agent, action, modality, time, guard, rep } if self.atomics < self.cfg.max_atomic => {
                self.atomics += 1;
                let mut c = Clause::atomic(
                    name.clone(),
                    Agent::new(self.cfg.agents[*agent]).unwrap(),
                    *modality,
                    Action::from_phrase(self.cfg.actions[*action]).unwrap(),
                );
                if let Some(t) = time {
                    c = c.with_time(plain_time(t));
                }
                pending.push(Pending { clause: name, time: time.as_ref().and_then(|t| t.reference), guard: guard.clone(), rep: *rep });
                c
            }
            // over the atomic budget: keep the shape, lose the norm
            Shape::Atomic { time, .. } | Shape::Decl { time, .. } => {
                let text = match s {
                    Shape::Decl { text, .. } => text.clone(),
                    _ => "placeholder".into(),
                };
                pending.push(Pending { clause: name.clone(), time: time.as_ref().and_then(|t| t.reference), guard: None, rep: None });
                Clause::declaration(name, text, time.as_ref().map(plain_time))
            }
            Shape::Comp { connective, children, guard, rep } => {
                pending.push(Pending { clause: name.clone(), time: None, guard: guard.clone(), rep: *rep });
                let mut kids = Vec::new();
                for child in children {
                    let (k, p) = self.clause(child);
                    kids.push(k);
                    pending.extend(p);
                }
                Clause::composite(name, *connective, kids)
            }
        };
        (clause, pending)
    }
}

struct Pending {
    clause: String,
    time: Option<usize>,
    guard: Option<GuardSpec>,
    rep: Option<usize>,
}

fn plain_time(t: &TimeSpec) -> TimeExpr {
    TimeExpr { low: t.low, high: t.high, strict: t.strict, reference: None }
}

fn find_mut<'a>(clauses: &'a mut [Clause], name: &str) -> Option<&'a mut Clause> {
    for c in clauses {
        if c.name == name {
            return Some(c);
        }
        if let ClauseBody::Composite(comp) = &mut c.body {
            if let Some(found) = find_mut(&mut comp.children, name) {
                return Some(found);
            }
        }
    }
    None
}

fn resolve_guard(g: &GuardSpec, names: &[String], own: &str) -> Guard {
    let pick = |i: usize| {
        let n = &names[i % names.len()];
        if n == own { names[(i + 1) % names.len()].clone() } else { n.clone() }
    };
    match g {
        GuardSpec::Done(i) => Guard::done(pick(*i)),
        GuardSpec::Violated(i) => Guard::violated(pick(*i)),
        GuardSpec::Not(a) => Guard::not(resolve_guard(a, names, own)),
        GuardSpec::And(a, b) => Guard::and(resolve_guard(a, names, own), resolve_guard(b, names, own)),
        GuardSpec::Or(a, b) => Guard::or(resolve_guard(a, names, own), resolve_guard(b, names, own)),
    }
}

fn build(cfg: &GenConfig, body: &[Shape], reps: &[Shape], title: String, prefix: &str) -> ContractModel {
    let mut namer = Namer { cfg, prefix, count: 0, atomics: 0 };
    let mut model = ContractModel::new(title);
    let mut pending = Vec::new();
    let mut body_names = HashSet::new();
    for s in body {
        let (c, p) = namer.clause(s);
        body_names.extend(p.iter().map(|p| p.clause.clone()));
        pending.extend(p);
        model.clauses.push(c);
    }
    for s in reps {
        let (c, p) = namer.clause(s);
        pending.extend(p);
        model.reparations.push(c);
    }
    let rep_names: Vec<String> = model.reparations.iter().map(|c| c.name.clone()).collect();
    let rep_index: HashMap<String, usize> = rep_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let root_of: HashMap<String, usize> = model
        .reparations
        .iter()
        .enumerate()
        .flat_map(|(i, r)| subtree_names(r).into_iter().map(move |n| (n, i)))
        .collect();

    let names: Vec<String> = pending.iter().map(|p| p.clause.clone()).collect();
    for p in &pending {
        let time_ref = p.time.map(|i| names[i % names.len()].clone());
        let guard = p.guard.as_ref().filter(|_| names.len() > 1).map(|g| resolve_guard(g, &names, &p.clause));
        // a reparation tree may only be repaired by a later tree, so no cycles
        let rep = p.rep.filter(|_| !rep_names.is_empty()).and_then(|i| match root_of.get(&p.clause) {
            None => Some(rep_names[i % rep_names.len()].clone()),
            Some(&own) if own + 1 < rep_names.len() => Some(rep_names[own + 1 + i % (rep_names.len() - own - 1)].clone()),
            Some(_) => None,
        });
        let all = model.clauses.iter_mut().chain(model.reparations.iter_mut());
        let c = all.into_iter().find_map(|c| find_mut(std::slice::from_mut(c), &p.clause)).expect("named clause");
        if let Some(r) = time_ref {
            match &mut c.body {
                ClauseBody::Atomic(a) => a.time.as_mut().unwrap().reference = Some(r),
                ClauseBody::Declaration(d) => d.time.as_mut().unwrap().reference = Some(r),
                ClauseBody::Composite(_) => {}
            }
        }
        if let Some(g) = guard {
            *c = c.clone().with_guard(g);
        }
        if let Some(r) = rep {
            *c = c.clone().with_reparation(r);
        }
    }

    // Every reparation must be referenced: hand unreferenced ones to a
    // clause that can carry them, otherwise drop them.
    loop {
        let referenced: HashSet<String> =
            model.all_clauses().iter().filter_map(|r| r.clause.reparation().map(str::to_string)).collect();
        let Some(missing) = rep_names.iter().find(|n| !referenced.contains(*n) && model.reparations.iter().any(|r| &r.name == *n)) else {
            break;
        };
        let idx = rep_index[missing];
        let carrier = model
            .all_clauses()
            .iter()
            .filter(|r| !matches!(r.clause.body, ClauseBody::Declaration(_)) && r.clause.reparation().is_none())
            .filter(|r| root_of.get(&r.clause.name).is_none_or(|&own| own < idx))
            .map(|r| r.clause.name.clone())
            .next();
        match carrier {
            Some(name) => {
                let all = model.clauses.iter_mut().chain(model.reparations.iter_mut());
                let c = all.into_iter().find_map(|c| find_mut(std::slice::from_mut(c), &name)).unwrap();
                *c = c.clone().with_reparation(missing.clone());
            }
            None => drop_reparation(&mut model, missing),
        }
    }
    let diags = validate(&model);
    assert!(diags.is_empty(), "generator produced an invalid model: {diags:?}\n{model:?}");
    model
}

fn subtree_names(c: &Clause) -> Vec<String> {
    let mut out = vec![c.name.clone()];
    for k in c.children() {
        out.extend(subtree_names(k));
    }
    out
}

/// Removes a reparation tree and every guard, window or reparation that
/// points into it.
fn drop_reparation(model: &mut ContractModel, name: &str) {
    let pos = model.reparations.iter().position(|r| r.name == name).unwrap();
    let gone: HashSet<String> = subtree_names(&model.reparations.remove(pos)).into_iter().collect();
    fn scrub(c: &mut Clause, gone: &HashSet<String>) {
        let guard_hits = c.guard().is_some_and(|g| g.references().iter().any(|r| gone.contains(*r)));
        let rep_hits = c.reparation().is_some_and(|r| gone.contains(r));
        match &mut c.body {
            ClauseBody::Atomic(a) => {
                if guard_hits {
                    a.guard = None;
                }
                if rep_hits {
                    a.reparation = None;
                }
                if let Some(t) = &mut a.time {
                    if t.reference.as_ref().is_some_and(|r| gone.contains(r)) {
                        t.reference = None;
                    }
                }
            }
            ClauseBody::Declaration(d) => {
                if let Some(t) = &mut d.time {
                    if t.reference.as_ref().is_some_and(|r| gone.contains(r)) {
                        t.reference = None;
                    }
                }
            }
            ClauseBody::Composite(comp) => {
                if guard_hits {
                    comp.guard = None;
                }
                if rep_hits {
                    comp.reparation = None;
                }
                for k in &mut comp.children {
                    scrub(k, gone);
                }
            }
        }
    }
    for c in model.clauses.iter_mut().chain(model.reparations.iter_mut()) {
        scrub(c, &gone);
    }
}

fn prop_expr(keys: Vec<String>, max_const: u32) -> BoxedStrategy<PropExpr> {
    let leaf = if keys.is_empty() {
        Just(PropExpr::AllComplete).boxed()
    } else {
        let k = proptest::sample::select(keys);
        prop_oneof![
            2 => Just(PropExpr::AllComplete),
            2 => k.clone().prop_map(PropExpr::IsDone),
            1 => k.clone().prop_map(PropExpr::Conflict),
            2 => (k, 0..=max_const + 2).prop_map(|(k, n)| PropExpr::ClockDiffLt(k, n)),
        ]
        .boxed()
    };
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(PropExpr::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| PropExpr::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| PropExpr::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| PropExpr::implies(a, b)),
        ]
    })
    .boxed()
}

/// A small model, a property over its action keys and a horizon at
/// least the model's largest constant plus one.
pub fn checking_case(cfg: GenConfig, max_horizon: u32) -> impl Strategy<Value = (ContractModel, Property, u32)> {
    let max_const = cfg.max_const;
    model(cfg).prop_flat_map(move |m| {
        let mut keys: Vec<String> = m.all_clauses().iter().filter_map(|r| r.clause.as_atomic()).map(|a| a.key().as_str().to_string()).collect();
        keys.sort();
        keys.dedup();
        let q = prop_oneof![Just(Quantifier::Always), Just(Quantifier::Eventually)];
        let lo = m.max_constant() + 1;
        (Just(m), q, prop_expr(keys, max_const), lo..=max_horizon.max(lo))
            .prop_map(|(m, quantifier, body, h)| (m, Property { quantifier, body }, h))
    })
}

/// Arbitrary clause tables: any cell text, including tabs and newlines.
pub fn table() -> impl Strategy<Value = TsvTable> {
    let cell = "(\\PC|[\t\n\r\\\\]){0,12}";
    let modality = prop_oneof![
        Just(RowModality::Unknown),
        Just(RowModality::Declaration),
        modality().prop_map(RowModality::Norm),
    ];
    let conn = prop_oneof![Just(RowConnective::None), Just(RowConnective::And), Just(RowConnective::Or), Just(RowConnective::Seq)];
    let row = (cell, cell, modality, cell, cell, conn, cell, cell);
    proptest::collection::vec(row, 0..8).prop_map(|rows| TsvTable {
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, (text, agent, modality, verb, object, connective, condition, time))| ClauseRow {
                id: (i + 1).to_string(),
                text,
                agent,
                modality,
                verb,
                object,
                connective,
                condition,
                time,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;

    #[test]
    fn generated_models_validate_and_respect_limits() {
        let mut runner = TestRunner::deterministic();
        let strat = model(GenConfig::small());
        for _ in 0..300 {
            let m = strat.new_tree(&mut runner).unwrap().current();
            let atomics = m.all_clauses().iter().filter(|r| r.clause.as_atomic().is_some()).count();
            assert!(atomics <= 4);
            assert!(m.max_constant() <= 10);
        }
    }
}
