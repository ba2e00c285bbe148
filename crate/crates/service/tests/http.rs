use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use norma_service::{router, Config};
use tower::ServiceExt;

const COURSE_TSV: &str = include_str!("../../core/fixtures/course.tsv");
const COURSE_TXT: &str = include_str!("../../core/fixtures/course.txt");

struct Reply {
    status: StatusCode,
    misses: Option<String>,
    content_type: String,
    body: String,
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<String>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body.into())).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let header = |name: &str| headers.get(name).map(|v| v.to_str().unwrap().to_string());
    let misses = header("x-lexicon-misses");
    let content_type = header("content-type").unwrap_or_default();
    let body = String::from_utf8(res.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    Reply { status, misses, content_type, body }
}

fn app() -> (Router, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    (router(&Config::new(dir.path())).unwrap(), dir)
}

fn error_code(r: &Reply) -> String {
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert!(v.get("message").is_some() && v.get("location").is_some(), "{}", r.body);
    v["code"].as_str().unwrap().to_string()
}

async fn course_coml(app: &Router) -> String {
    let r = call(app, "POST", "/tsv/coml", COURSE_TSV).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    r.body
}

#[tokio::test]
async fn extraction_endpoint() {
    let (app, _dir) = app();
    let r = call(&app, "POST", "/nl/tsv", COURSE_TXT).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.content_type.starts_with("text/tab-separated-values"));
    let top = r.body.lines().skip(1).filter(|l| !l.split('\t').next().unwrap().contains('.')).count();
    assert_eq!(top, 7);
    let r = call(&app, "POST", "/nl/tsv", "The buyer must pay.").await;
    assert_eq!(r.body.lines().count(), 2);
    let r = call(&app, "POST", "/nl/tsv", "").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&r), "EMPTY_BODY");
}

#[tokio::test]
async fn conversions_round_trip_through_http() {
    let (app, _dir) = app();
    let coml = course_coml(&app).await;
    let model = norma_core::coml::parse_coml(&coml).unwrap();
    let expected = norma_core::tsv::rows_to_model(&norma_core::tsv::parse_tsv(COURSE_TSV).unwrap()).unwrap();
    assert_eq!(model, expected);

    let r = call(&app, "POST", "/coml/codsh", coml.as_str()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(norma_core::codsh::parse_codsh(&r.body).unwrap(), model);

    let r = call(&app, "POST", "/coml/cnl", coml.as_str()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.body.contains("[c1] the student must register for course before time 7"), "{}", r.body);
    assert_eq!(r.misses, None);

    let r = call(&app, "POST", "/coml/uppaal", coml.as_str()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.content_type.starts_with("application/xml"));
    assert!(r.body.contains("<nta>"));
}

#[tokio::test]
async fn unknown_words_are_reported_in_a_header() {
    let (app, _dir) = app();
    let coml = course_coml(&app).await.replace("verb=\"resubmit\"", "verb=\"zorbulate\"");
    assert!(coml.contains("zorbulate"), "{coml}");
    let r = call(&app, "POST", "/coml/cnl", coml).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.misses.as_deref(), Some("zorbulate"));
    assert!(r.body.contains("not verbalized"));
}

#[tokio::test]
async fn malformed_input_gives_module_codes() {
    let (app, _dir) = app();
    for uri in ["/coml/codsh", "/coml/cnl", "/coml/uppaal"] {
        let r = call(&app, "POST", uri, "<contract").await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST);
        assert_eq!(error_code(&r), "XML_MALFORMED");
    }
    let r = call(&app, "POST", "/tsv/coml", "id\ttext\n").await;
    assert_eq!(error_code(&r), "BAD_HEADER");
    let r = call(&app, "POST", "/coml/syntactic", "{").await;
    assert_eq!(error_code(&r), "BAD_REQUEST");
    let r = call(&app, "GET", "/nowhere", "").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

fn envelope(coml: &str, query: serde_json::Value) -> String {
    serde_json::json!({ "coml": coml, "query": query }).to_string()
}

#[tokio::test]
async fn syntactic_query() {
    let (app, _dir) = app();
    let coml = course_coml(&app).await;
    let r = call(&app, "POST", "/coml/syntactic", envelope(&coml, serde_json::json!({"template": 1, "bindings": {"agent": "student"}}))).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v["matches"].as_array().unwrap().len(), 4);
    assert_eq!(
        v["answer"],
        "The following are obligations of student:\n- register for course\n- submit assignment\n- sign up for exam\n- pass exam"
    );
    let r = call(&app, "POST", "/coml/syntactic", envelope(&coml, serde_json::json!({"template": 42}))).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&r), "UNKNOWN_TEMPLATE");
    let r = call(&app, "POST", "/coml/syntactic", envelope(&coml, serde_json::json!({"template": 1, "bindings": {"agent": "dean"}}))).await;
    assert_eq!(error_code(&r), "UNKNOWN_AGENT");
}

#[tokio::test]
async fn semantic_query() {
    let (app, _dir) = app();
    let coml = course_coml(&app).await;
    let q = |n: u32| serde_json::json!({"template": 7, "bindings": {"agent": "student", "action": "register for course", "number": n}});
    let r = call(&app, "POST", "/coml/semantic", envelope(&coml, q(5))).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v["outcome"], "NotSatisfied");
    let trace = v["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    assert!(trace.iter().all(|t| t.get("agent").is_some() && t.get("action").is_some() && t.get("time").is_some()));
    let r = call(&app, "POST", "/coml/semantic", envelope(&coml, q(7))).await;
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v["outcome"], "Satisfied");
    assert!(v["trace"].is_null());
}

#[tokio::test]
async fn state_limit_is_unprocessable() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::new(dir.path());
    config.state_limit = 10;
    let app = router(&config).unwrap();
    let coml = course_coml(&app).await;
    let r = call(&app, "POST", "/coml/semantic", envelope(&coml, serde_json::json!({"template": 9}))).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&r), "STATE_LIMIT");
}

#[tokio::test]
async fn templates_and_completions() {
    let (app, _dir) = app();
    let r = call(&app, "GET", "/templates", "").await;
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 10);
    assert_eq!(v[6]["slots"], serde_json::json!(["agent", "action", "number"]));
    let coml = course_coml(&app).await;
    let body = serde_json::json!({"coml": coml, "template": 7}).to_string();
    let r = call(&app, "POST", "/coml/completions", body).await;
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v["agent"], serde_json::json!(["grader", "student"]));
    assert_eq!(v["number"], serde_json::json!([]));
    assert!(v["action"].as_array().unwrap().contains(&serde_json::json!("register for course")));
}

#[tokio::test]
async fn model_storage() {
    let (app, _dir) = app();
    let coml = course_coml(&app).await;
    let r = call(&app, "PUT", "/models/course", coml.as_str()).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let r = call(&app, "GET", "/models/course", "").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, coml);
    let r = call(&app, "PUT", "/models/course", coml.as_str()).await;
    assert_eq!(r.status, StatusCode::OK);
    let r = call(&app, "GET", "/models", "").await;
    let v: serde_json::Value = serde_json::from_str(&r.body).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["id"], "course");
    assert!(v[0]["createdAt"].is_string() && v[0]["updatedAt"].is_string());
    let r = call(&app, "GET", "/models/other", "").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, "PUT", "/models/bad", "<contract").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, "PUT", "/models/a.b", coml.as_str()).await;
    assert_eq!(error_code(&r), "BAD_ID");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writers_never_tear_a_model() {
    let (app, _dir) = app();
    let base = norma_core::tsv::rows_to_model(&norma_core::tsv::parse_tsv(COURSE_TSV).unwrap()).unwrap();
    let versions: Vec<String> = (0..8)
        .map(|i| {
            let mut m = base.clone();
            m.title = format!("version {i} {}", "x".repeat(i * 5000));
            norma_core::coml::emit_coml(&m).unwrap()
        })
        .collect();
    let mut tasks = Vec::new();
    for round in 0..5 {
        for v in &versions {
            let (app, v) = (app.clone(), v.clone());
            tasks.push(tokio::spawn(async move { call(&app, "PUT", "/models/shared", v).await.status }));
        }
        let app = app.clone();
        let versions = versions.clone();
        tasks.push(tokio::spawn(async move {
            let r = call(&app, "GET", "/models/shared", "").await;
            if r.status == StatusCode::OK {
                assert!(versions.contains(&r.body), "torn read in round {round}");
            }
            r.status
        }));
    }
    for t in tasks {
        let status = t.await.unwrap();
        assert!(status.is_success() || status == StatusCode::NOT_FOUND);
    }
    let r = call(&app, "GET", "/models/shared", "").await;
    assert!(versions.contains(&r.body));
}
