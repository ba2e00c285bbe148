//! Acceptance run: one `[PASS]` or `[FAIL]` line per criterion. Exits
//! nonzero if any criterion fails.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use norma_core::checker::{check, CheckOptions, Outcome};
use norma_core::codsh::{parse_codsh, print_codsh};
use norma_core::coml::{emit_coml, parse_coml};
use norma_core::contract::{Action, Agent, ContractModel, Modality};
use norma_core::extraction::{extract, RuleSet};
use norma_core::nta::{emit_uppaal_xml, encode_property, translate, Property, Quantifier, SemanticQuery};
use norma_core::query::{run_syntactic, QueryInstance};
use norma_core::tsv::{emit_tsv, parse_tsv, rows_to_model, RowModality};
use norma_testkit::gen::{checking_case, model, table, GenConfig};
use norma_testkit::oracle::decide;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};
use tower::ServiceExt;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");
const COURSE_TSV: &str = include_str!("../../core/fixtures/course.tsv");
const COURSE_TXT: &str = include_str!("../../core/fixtures/course.txt");

type Verdict = Result<String, String>;

fn course() -> ContractModel {
    rows_to_model(&parse_tsv(COURSE_TSV).unwrap()).unwrap()
}

fn syntactic_query() -> Verdict {
    let m = course();
    let q = QueryInstance::new(1).bind("agent", "student");
    let start = Instant::now();
    let r = run_syntactic(&m, &q).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected =
        "The following are obligations of student:\n- register for course\n- submit assignment\n- sign up for exam\n- pass exam";
    if r.answer != expected {
        return Err(format!("answer was {:?}", r.answer));
    }
    if elapsed >= Duration::from_millis(100) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("4 bulleted actions, exact match, {elapsed:?}"))
}

fn semantic_query() -> Verdict {
    let m = course();
    let net = translate(&m).map_err(|e| e.to_string())?;
    let query = |bound| SemanticQuery::MustBefore {
        agent: Agent::new("student").unwrap(),
        action: Action::from_phrase("register for course").unwrap(),
        bound,
    };
    let mut notes = Vec::new();
    for (bound, want) in [(5, Outcome::NotSatisfied), (7, Outcome::Satisfied)] {
        let prop = encode_property(&query(bound), &net).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let v = check(&net, &prop, CheckOptions::default()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        if v.outcome != want {
            return Err(format!("bound {bound}: {:?}", v.outcome));
        }
        if elapsed > Duration::from_secs(5) {
            return Err(format!("bound {bound}: took {elapsed:?}"));
        }
        if want == Outcome::NotSatisfied {
            let trace = v.trace.ok_or("no counterexample")?;
            let reg = trace.0.iter().find(|e| e.action.label() == "register for course").ok_or("register missing from trace")?;
            if !(5..7).contains(&reg.time) {
                return Err(format!("register at {}", reg.time));
            }
            notes.push(format!("bound 5 NotSatisfied, register at {} ({elapsed:?})", reg.time));
        } else {
            notes.push(format!("bound 7 Satisfied ({elapsed:?})"));
        }
    }
    Ok(notes.join("; "))
}

fn oracle_equivalence() -> Verdict {
    let mut runner = TestRunner::deterministic();
    let strat = checking_case(GenConfig::small(), 12);
    let (mut agree, mut total) = (0, 0);
    let mut satisfied = 0;
    for _ in 0..200 {
        let (m, prop, horizon) = strat.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let net = translate(&m).map_err(|e| e.to_string())?;
        for quantifier in [Quantifier::Always, Quantifier::Eventually] {
            let p = Property { quantifier, body: prop.body.clone() };
            let v = check(&net, &p, CheckOptions { horizon: Some(horizon), ..Default::default() }).map_err(|e| e.to_string())?;
            let o = decide(&m, &p, horizon, 50_000_000).map_err(|e| format!("{e:?}"))?;
            total += 1;
            let got = v.outcome == Outcome::Satisfied;
            satisfied += got as usize;
            if got == o {
                agree += 1;
            } else {
                return Err(format!("disagreement on {p} at horizon {horizon}: {m:?}"));
            }
        }
    }
    Ok(format!("{agree}/{total} verdicts agree on 200 models ({satisfied} satisfied)"))
}

fn round_trips() -> Verdict {
    let config = Config { cases: 500, failure_persistence: None, ..Config::default() };
    let mut notes = Vec::new();
    let mut runner = TestRunner::new(config.clone());
    runner
        .run(&model(GenConfig::wide()), |m| {
            let back = parse_coml(&emit_coml(&m).unwrap()).unwrap();
            proptest::prop_assert_eq!(back, m);
            Ok(())
        })
        .map_err(|e| format!("COML: {e}"))?;
    notes.push("COML 500/500");
    let mut runner = TestRunner::new(config.clone());
    runner
        .run(&table(), |t| {
            proptest::prop_assert_eq!(parse_tsv(&emit_tsv(&t)).unwrap(), t);
            Ok(())
        })
        .map_err(|e| format!("TSV: {e}"))?;
    notes.push("TSV 500/500");
    let mut runner = TestRunner::new(config);
    runner
        .run(&model(GenConfig::wide()), |m| {
            proptest::prop_assert_eq!(parse_codsh(&print_codsh(&m)).unwrap(), m);
            Ok(())
        })
        .map_err(|e| format!("CODSH: {e}"))?;
    notes.push("CODSH 500/500");
    Ok(notes.join(", "))
}

fn extraction() -> Verdict {
    use Modality::*;
    let gold = [
        (RowModality::Norm(Obligation), "student"),
        (RowModality::Norm(Obligation), "student"),
        (RowModality::Declaration, ""),
        (RowModality::Norm(Obligation), "grader"),
        (RowModality::Norm(Obligation), "student"),
        (RowModality::Declaration, ""),
        (RowModality::Norm(Obligation), "student"),
    ];
    let t = extract(COURSE_TXT, RuleSet::english());
    let top: Vec<_> = t.rows.iter().filter(|r| !r.id.contains('.')).collect();
    if top.len() != 7 {
        return Err(format!("{} top-level rows", top.len()));
    }
    let modality = top.iter().zip(&gold).filter(|(r, g)| r.modality == g.0).count();
    let agent = top.iter().zip(&gold).filter(|(r, g)| r.agent == g.1).count();
    let note = format!("modality {modality}/7, agent {agent}/7");
    if modality == 7 && agent >= 6 {
        Ok(note)
    } else {
        Err(note)
    }
}

/// Checks the flat UPPAAL document layout and returns (templates, channels).
fn validate_uppaal(xml: &str) -> Result<(usize, usize), String> {
    let opts = roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() };
    let doc = roxmltree::Document::parse_with_options(xml, opts).map_err(|e| format!("not well-formed: {e}"))?;
    let root = doc.root_element();
    if root.tag_name().name() != "nta" {
        return Err("root is not <nta>".into());
    }
    let kids: Vec<_> = root.children().filter(|n| n.is_element()).collect();
    let names: Vec<&str> = kids.iter().map(|n| n.tag_name().name()).collect();
    let order_ok = names.first() == Some(&"declaration")
        && names.last() == Some(&"system")
        && names[1..names.len() - 1].iter().all(|n| *n == "template")
        && names.len() >= 3;
    if !order_ok {
        return Err(format!("unexpected <nta> children {names:?}"));
    }
    let declaration = kids[0].text().unwrap_or("");
    let chan = declared_channels(declaration);
    let mut sends = HashSet::new();
    let mut receives = HashSet::new();
    let mut template_names = Vec::new();
    for t in &kids[1..kids.len() - 1] {
        let elems: Vec<_> = t.children().filter(|n| n.is_element()).collect();
        let tags: Vec<&str> = elems.iter().map(|n| n.tag_name().name()).collect();
        if tags.first() != Some(&"name") {
            return Err("template without leading <name>".into());
        }
        template_names.push(elems[0].text().unwrap_or("").to_string());
        let init_at = tags.iter().position(|t| *t == "init").ok_or("template without <init>")?;
        if !tags[1..init_at].iter().all(|t| *t == "location") || init_at == 1 {
            return Err("locations must precede <init>".into());
        }
        if !tags[init_at + 1..].iter().all(|t| *t == "transition") {
            return Err("only transitions may follow <init>".into());
        }
        let ids: HashSet<&str> = elems[1..init_at].iter().filter_map(|l| l.attribute("id")).collect();
        if ids.len() != init_at - 1 {
            return Err("location ids missing or repeated".into());
        }
        for l in &elems[1..init_at] {
            for c in l.children().filter(|n| n.is_element()) {
                match (c.tag_name().name(), c.attribute("kind")) {
                    ("name", _) | ("label", Some("invariant")) | ("urgent", _) | ("committed", _) => {}
                    other => return Err(format!("unexpected location child {other:?}")),
                }
            }
        }
        if !elems[init_at].attribute("ref").is_some_and(|r| ids.contains(r)) {
            return Err("init refers to no location".into());
        }
        for tr in &elems[init_at + 1..] {
            let parts: Vec<_> = tr.children().filter(|n| n.is_element()).collect();
            let refs_ok = parts.len() >= 2
                && parts[0].tag_name().name() == "source"
                && parts[1].tag_name().name() == "target"
                && parts[..2].iter().all(|p| p.attribute("ref").is_some_and(|r| ids.contains(r)));
            if !refs_ok {
                return Err("transition source/target invalid".into());
            }
            for label in &parts[2..] {
                let kind = label.attribute("kind").unwrap_or("");
                if label.tag_name().name() != "label" || !["guard", "synchronisation", "assignment", "select"].contains(&kind) {
                    return Err(format!("unexpected transition child kind {kind:?}"));
                }
                if kind == "synchronisation" {
                    let s = label.text().unwrap_or("").trim();
                    let (name, dir) = s.split_at(s.len() - 1);
                    match dir {
                        "!" => sends.insert(name.to_string()),
                        "?" => receives.insert(name.to_string()),
                        _ => return Err(format!("bad synchronisation {s:?}")),
                    };
                }
            }
        }
    }
    let system = kids[kids.len() - 1].text().unwrap_or("");
    for n in &template_names {
        if !system.contains(n.as_str()) {
            return Err(format!("template {n} is not in the system line"));
        }
    }
    for c in &chan {
        if !sends.contains(c) || !receives.contains(c) {
            return Err(format!("channel {c} lacks a ! or ? side"));
        }
    }
    if chan.is_empty() {
        return Err("no channels declared".into());
    }
    Ok((template_names.len(), chan.len()))
}

/// Channel names from `chan` declarations.
fn declared_channels(decl: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for stmt in decl.split(';') {
        let words: Vec<&str> = stmt.split_whitespace().collect();
        if let Some(i) = words.iter().position(|w| *w == "chan") {
            for name in words[i + 1..].join(" ").split(',') {
                out.insert(name.trim().to_string());
            }
        }
    }
    out
}

fn uppaal_export() -> Verdict {
    let net = translate(&course()).map_err(|e| e.to_string())?;
    let (templates, channels) = validate_uppaal(&emit_uppaal_xml(&net))?;
    Ok(format!("well-formed, {templates} templates, {channels} channels each with ! and ?"))
}

fn cli(args: &[&str], stdin: Option<&str>) -> Result<Vec<u8>, String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_norma"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).map_err(|e| e.to_string())?;
    drop(pipe);
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if out.status.code().is_some_and(|c| c > 1) {
        return Err(format!("norma {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn service_conformance() -> Verdict {
    let store = tempfile::tempdir().map_err(|e| e.to_string())?;
    let app = norma_service::router(&norma_service::Config::new(store.path())).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let post = |uri: &str, body: String| -> Result<Vec<u8>, String> {
        rt.block_on(async {
            let req = Request::builder().method("POST").uri(uri).body(Body::from(body)).unwrap();
            let res = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
            if !res.status().is_success() {
                return Err(format!("{uri}: {}", res.status()));
            }
            Ok(res.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes().to_vec())
        })
    };
    let tsv_path = format!("{FIXTURES}/course.tsv");
    let txt_path = format!("{FIXTURES}/course.txt");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let coml_path = dir.path().join("course.coml").to_string_lossy().into_owned();
    cli(&["convert", &tsv_path, "-o", &coml_path], None)?;
    let coml = std::fs::read_to_string(&coml_path).map_err(|e| e.to_string())?;
    let envelope = |q: &str| format!("{{\"coml\": {}, \"query\": {q}}}", serde_json::to_string(&coml).unwrap());
    let syn = r#"{"template": 1, "bindings": {"agent": "student"}}"#;
    let sem = r#"{"template": 7, "bindings": {"agent": "student", "action": "register for course", "number": "5"}}"#;

    let pairs: Vec<(&str, Vec<u8>, Vec<u8>)> = vec![
        ("/nl/tsv", post("/nl/tsv", COURSE_TXT.into())?, cli(&["extract", &txt_path], None)?),
        ("/tsv/coml", post("/tsv/coml", COURSE_TSV.into())?, cli(&["convert", &tsv_path], None)?),
        ("/coml/codsh", post("/coml/codsh", coml.clone())?, cli(&["show", "--codsh", &coml_path], None)?),
        ("/coml/cnl", post("/coml/cnl", coml.clone())?, cli(&["show", "--cnl", &coml_path], None)?),
        (
            "/coml/syntactic",
            post("/coml/syntactic", envelope(syn))?,
            cli(&["query", "run", &coml_path, "--template", "1", "--bind", "agent=student", "--json"], None)?,
        ),
        ("/coml/uppaal", post("/coml/uppaal", coml.clone())?, cli(&["translate", &coml_path], None)?),
        (
            "/coml/semantic",
            post("/coml/semantic", envelope(sem))?,
            cli(
                &[
                    "check", &coml_path, "--template", "7", "--bind", "agent=student", "--bind", "action=register for course",
                    "--bind", "number=5", "--json",
                ],
                None,
            )?,
        ),
    ];
    for (uri, http, shell) in &pairs {
        if http != shell {
            return Err(format!("{uri} differs from the CLI output"));
        }
    }
    Ok(format!("{} endpoints byte-identical to the CLI; no secondary component involved", pairs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("syntactic query on the course contract", syntactic_query),
        ("semantic query on the course contract", semantic_query),
        ("checker agrees with brute-force oracle", oracle_equivalence),
        ("COML/TSV/CODSH round trips", round_trips),
        ("extraction on the course text", extraction),
        ("UPPAAL XML export", uppaal_export),
        ("service matches CLI", service_conformance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("[PASS] A{} {name}: {detail} [{took:.2?}]", i + 1),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] A{} {name}: {reason} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
