use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use imt_cli::registry::{Engine, EngineKind, EngineRegistry};
use imt_cli::{router, AppState, SessionStore};
use imtkit::imt::{simulate_session, CopyGenerator, ScriptedGenerator};
use imtkit::Sentence;
use serde_json::{json, Value};
use tower::ServiceExt;

const IT0: &str = "Durmamos por ahora ambos , y después Dios dirá .";
const IT1: &str = "Durmamos de momento ambos , y después Dios dirá .";
const IT2: &str = "Durmamos de momento los dos , y después Dios dirá .";

fn s(t: &str) -> Sentence {
    Sentence::from_words(t)
}

fn registry() -> EngineRegistry {
    let scripted = ScriptedGenerator::new()
        .respond(Sentence::default(), s(IT0))
        .respond(s("Durmamos de"), s(IT1))
        .respond(s("Durmamos de momento los"), s(IT2));
    let mut reg = EngineRegistry::new();
    reg.register(Engine {
        name: "fig4".into(),
        kind: EngineKind::Scripted,
        path: None,
        digest: "scripted".into(),
        generator: Arc::new(scripted),
    })
    .unwrap();
    reg
}

fn app_with(store: SessionStore) -> Router {
    router(AppState::new(registry(), store), None)
}

fn app() -> Router {
    app_with(SessionStore::in_memory())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create(app: &Router, engine: &str, text: &str) -> String {
    let (status, v) = call(app, "POST", "/api/sessions", Some(json!({"engine": engine, "source_text": text}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn correct(app: &Router, id: &str, position: usize, word: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/api/sessions/{id}/corrections"),
        Some(json!({"position": position, "word": word})),
    )
    .await
}

async fn accept(app: &Router, id: &str) -> (StatusCode, Value) {
    call(app, "POST", &format!("/api/sessions/{id}/accept"), None).await
}

const SOURCE: &str = "durmamos por aora entrambos, y despues, Dios dixo lo que sera.";

#[tokio::test]
async fn create_returns_the_detokenized_initial_suggestion() {
    let app = app();
    let (status, v) = call(&app, "POST", "/api/sessions", Some(json!({"engine": "fig4", "source_text": SOURCE}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(!v["session_id"].as_str().unwrap().is_empty());
    assert_eq!(v["hypothesis"], "Durmamos por ahora ambos, y después Dios dirá.");
    assert_eq!(v["prefix_len"], 0);
}

#[tokio::test]
async fn figure_four_session_over_http() {
    let app = app();
    let id = create(&app, "fig4", SOURCE).await;
    let (status, v) = correct(&app, &id, 2, "de").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["hypothesis"], "Durmamos de momento ambos, y después Dios dirá.");
    assert_eq!(v["prefix_len"], 2);
    assert_eq!((v["word_strokes"].as_u64(), v["mouse_actions"].as_u64()), (Some(1), Some(1)));
    let (status, v) = correct(&app, &id, 4, "los").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["hypothesis"], "Durmamos de momento los dos, y después Dios dirá.");
    let (status, v) = accept(&app, &id).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["final_text"], "Durmamos de momento los dos, y después Dios dirá.");
    assert_eq!(v["metrics"], json!({"word_strokes": 2, "mouse_actions": 3, "iterations": 2}));

    let (status, view) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["status"], "accepted");
    assert_eq!(view["log"].as_array().unwrap().len(), 2);
    assert_eq!(view["log"][0]["word"], "de");
}

#[tokio::test]
async fn create_errors() {
    let app = app();
    let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({"engine": "nope", "source_text": "a"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    for text in ["", "   "] {
        let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({"engine": "copy", "source_text": text}))).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    }
    let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({"source_text": "a"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn correction_errors() {
    let app = app();
    let id = create(&app, "copy", "a b c").await;
    for pos in [0, 5] {
        assert_eq!(correct(&app, &id, pos, "x").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    }
    assert_eq!(correct(&app, &id, 2, "two words").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(correct(&app, &id, 2, "x").await.0, StatusCode::OK);
    assert_eq!(correct(&app, &id, 2, "y").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(correct(&app, &id, 1, "y").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(correct(&app, "999", 3, "x").await.0, StatusCode::NOT_FOUND);
    assert_eq!(correct(&app, "abc", 3, "x").await.0, StatusCode::NOT_FOUND);
    assert_eq!(accept(&app, "999").await.0, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/corrections"),
        Some(json!({"position": -1, "word": "x"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn accept_fresh_then_reject_further_changes() {
    let app = app();
    let id = create(&app, "copy", "a b c").await;
    let (status, v) = accept(&app, &id).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["final_text"], "a b c");
    assert_eq!(v["metrics"], json!({"word_strokes": 0, "mouse_actions": 1, "iterations": 0}));
    assert_eq!(accept(&app, &id).await.0, StatusCode::CONFLICT);
    assert_eq!(correct(&app, &id, 2, "x").await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn truncation_costs_one_mouse_action() {
    let app = app();
    let id = create(&app, "copy", "a b c").await;
    let (status, v) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/corrections"),
        Some(json!({"position": 3, "end": true})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["hypothesis"], "a b");
    assert_eq!((v["word_strokes"].as_u64(), v["mouse_actions"].as_u64()), (Some(0), Some(1)));
    let (status, _) = call(&app, "POST", &format!("/api/sessions/{id}/corrections"), Some(json!({"position": 3}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn server_counters_match_the_simulator() {
    let app = app();
    let source = "vna dueña de casa fermosa y discreta";
    let reference = s("una dueña de la casa hermosa y discreta");
    let id = create(&app, "copy", source).await;
    // The leftmost-divergence user, driven through the API.
    let mut hyp: Vec<String> = s(source).into_tokens();
    loop {
        let pos = hyp.iter().zip(reference.iter()).position(|(a, b)| a != b);
        let pos = match pos {
            Some(p) => p,
            None if hyp.len() < reference.len() => hyp.len(),
            None => break,
        };
        let (status, v) = correct(&app, &id, pos + 1, &reference.tokens()[pos]).await;
        assert_eq!(status, StatusCode::OK);
        hyp = v["hypothesis_tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t.as_str().unwrap().to_string())
            .collect();
        if hyp.len() > reference.len() && hyp[..reference.len()] == *reference.tokens() {
            let body = json!({"position": reference.len() + 1, "end": true});
            let (status, _) = call(&app, "POST", &format!("/api/sessions/{id}/corrections"), Some(body)).await;
            assert_eq!(status, StatusCode::OK);
            break;
        }
    }
    let (_, v) = accept(&app, &id).await;
    let sim = simulate_session(&CopyGenerator, &s(source), &reference).unwrap();
    assert_eq!(v["metrics"]["word_strokes"].as_u64().unwrap() as usize, sim.word_strokes);
    assert_eq!(v["metrics"]["mouse_actions"].as_u64().unwrap() as usize, sim.mouse_actions);
    assert_eq!(v["metrics"]["iterations"].as_u64().unwrap() as usize, sim.iterations);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn conflicting_concurrent_corrections_are_serialized() {
    let app = app();
    for _ in 0..20 {
        let id = create(&app, "fig4", SOURCE).await;
        let (a, b) = tokio::join!(correct(&app, &id, 2, "de"), correct(&app, &id, 2, "de"));
        let mut codes = [a.0, b.0];
        codes.sort();
        assert_eq!(codes, [StatusCode::OK, StatusCode::UNPROCESSABLE_ENTITY]);
        let (_, view) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
        assert_eq!(view["word_strokes"], 1);
        assert_eq!(view["iterations"], 1);
    }
}

#[tokio::test]
async fn journal_replay_after_restart_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("journal.jsonl");
    let (id, metrics, open_id) = {
        let app = app_with(SessionStore::with_journal(&path).unwrap());
        let id = create(&app, "fig4", SOURCE).await;
        correct(&app, &id, 2, "de").await;
        correct(&app, &id, 4, "los").await;
        let (_, v) = accept(&app, &id).await;
        let open_id = create(&app, "copy", "a b").await;
        correct(&app, &open_id, 2, "c").await;
        (id, v["metrics"].clone(), open_id)
    };
    let app = app_with(SessionStore::with_journal(&path).unwrap());
    let (status, view) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        json!({"word_strokes": view["word_strokes"], "mouse_actions": view["mouse_actions"], "iterations": view["iterations"]}),
        metrics
    );
    assert_eq!(view["hypothesis"], "Durmamos de momento los dos, y después Dios dirá.");
    assert_eq!(accept(&app, &id).await.0, StatusCode::CONFLICT);
    let (_, open) = call(&app, "GET", &format!("/api/sessions/{open_id}"), None).await;
    assert_eq!(open["hypothesis"], "a c");
    assert_eq!(open["status"], "active");
    let fresh = create(&app, "copy", "x").await;
    assert!(fresh.parse::<u64>().unwrap() > open_id.parse::<u64>().unwrap());
}

#[tokio::test]
async fn engines_are_listed() {
    let app = app();
    let (status, v) = call(&app, "GET", "/api/engines", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["copy", "fig4"]);
    assert_eq!(v[0]["kind"], "copy");
    assert_eq!(call(&app, "GET", "/api/nothing", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_files_are_served_from_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>workbench</h1>").unwrap();
    let app = router(AppState::new(registry(), SessionStore::in_memory()), Some(dir.path().to_path_buf()));
    let resp = app
        .clone()
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<h1>workbench</h1>");
    let (status, _) = call(&app, "GET", "/api/engines", None).await;
    assert_eq!(status, StatusCode::OK);
}
