//! End-to-end checks on the university course contract.

use norma_core::checker::{check, CheckOptions, Outcome};
use norma_core::coml::{emit_coml, parse_coml};
use norma_core::contract::{canonical_names, collect_agents, Action, Agent};
use norma_core::nta::{encode_property, translate, SemanticQuery};
use norma_core::tsv::{model_to_rows, parse_tsv, rows_to_model};

const COURSE_TSV: &str = include_str!("../fixtures/course.tsv");

fn course() -> norma_core::contract::ContractModel {
    rows_to_model(&parse_tsv(COURSE_TSV).unwrap()).unwrap()
}

fn register_before(bound: u32) -> SemanticQuery {
    SemanticQuery::MustBefore {
        agent: Agent::new("student").unwrap(),
        action: Action::from_phrase("register for course").unwrap(),
        bound,
    }
}

#[test]
fn fixture_converts() {
    let m = course();
    let top: Vec<_> = m.clauses.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(top, ["c1", "c3", "c4", "c6", "c7", "c2"]);
    assert_eq!(m.reparations[0].name, "c5");
    let agents: Vec<String> = collect_agents(&m).iter().map(|a| a.to_string()).collect();
    assert_eq!(agents, ["grader", "student"]);
    assert_eq!(m.max_constant(), 60);
}

#[test]
fn fixture_round_trips_through_rows_and_coml() {
    let m = course();
    let rows = model_to_rows(&m);
    assert_eq!(rows.rows.len(), 9);
    assert_eq!(rows_to_model(&rows).unwrap(), m);
    let back = parse_coml(&emit_coml(&m).unwrap()).unwrap();
    assert_eq!(canonical_names(&back), canonical_names(&m));
    assert_eq!(back, m);
}

#[test]
fn registration_before_day_five_is_not_required() {
    let m = course();
    let net = translate(&m).unwrap();
    let prop = encode_property(&register_before(5), &net).unwrap();
    assert_eq!(
        prop.to_string(),
        "A[] allComplete() imply (isDone(student_register_for_course) and t0 - Clocks[student_register_for_course] < 5)"
    );
    let v = check(&net, &prop, CheckOptions::default()).unwrap();
    assert_eq!(v.outcome, Outcome::NotSatisfied);
    let trace = v.trace.unwrap();
    let reg = trace.0.iter().find(|e| e.action.label() == "register for course").unwrap();
    assert!((5..7).contains(&reg.time), "{trace:?}");
    assert!(trace.0.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn registration_before_day_seven_is_required() {
    let m = course();
    let net = translate(&m).unwrap();
    let prop = encode_property(&register_before(7), &net).unwrap();
    let v = check(&net, &prop, CheckOptions::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Satisfied);
    assert!(v.trace.is_none());
}

// Fewest actions: skipping the first submission and resubmitting also
// releases the grader, whose clause is guarded on a successful submission.
#[test]
fn course_is_completable() {
    let net = translate(&course()).unwrap();
    let prop = encode_property(&SemanticQuery::Completable, &net).unwrap();
    let v = check(&net, &prop, CheckOptions::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Satisfied);
    let labels: Vec<String> = v.trace.unwrap().0.iter().map(|e| e.to_string()).collect();
    assert_eq!(
        labels,
        [
            "student register for course at time 0",
            "student sign up for exam at time 0",
            "student resubmit assignment at time 11",
            "student pass exam at time 60"
        ]
    );
}
