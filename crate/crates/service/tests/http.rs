mod common;

use std::process::Command;
use std::sync::Arc;
use std::time::Duration;

use common::{artifacts, state};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};
use triage_core::triage::{load_ground_truth, script, scripted_session, Recommendation, Status};
use triage_service::api::{AppState, BackgroundServer, ErrorBody, Health, SearchReply, SessionReply};
use triage_service::config::Config;
use triage_service::pipeline;

fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(30)).build().unwrap()
}

fn post(c: &Client, s: &BackgroundServer, path: &str, body: &Value) -> (StatusCode, Value) {
    let r = c.post(s.url(path)).json(body).send().unwrap();
    (r.status(), r.json().unwrap_or(Value::Null))
}

fn get(c: &Client, s: &BackgroundServer, path: &str) -> (StatusCode, String) {
    let r = c.get(s.url(path)).send().unwrap();
    (r.status(), r.text().unwrap())
}

fn error_kind(v: &Value) -> String {
    serde_json::from_value::<ErrorBody>(v.clone()).unwrap().error
}

/// A collecting session's reply and the concepts used to open it.
fn open(c: &Client, s: &BackgroundServer, app: &AppState, truth_path: &std::path::Path) -> SessionReply {
    let truth = load_ground_truth(truth_path).unwrap();
    for case in &truth {
        let Some(sc) = script(&app.engine, case) else { continue };
        let (status, v) = post(
            c,
            s,
            "/v1/sessions",
            &json!({"age": sc.demographics.age, "gender": sc.demographics.gender, "concepts": sc.initial}),
        );
        assert_eq!(status, StatusCode::OK);
        let reply: SessionReply = serde_json::from_value(v).unwrap();
        if reply.status == Status::Collecting {
            return reply;
        }
    }
    panic!("no ground-truth case leads to a question");
}

#[test]
fn status_codes_follow_the_contract() {
    let a = artifacts(1500, 5);
    let app = state(&a.cfg);
    let server = BackgroundServer::start(app.clone(), 2).unwrap();
    let c = client();

    for bad in [
        json!({"age": 30, "gender": "female", "concepts": []}),
        json!({"age": 30, "gender": "robot", "concepts": ["bauchweh"]}),
        json!({"age": 500, "gender": "male", "concepts": ["C_abdominal_pain"]}),
        json!({"age": 30, "gender": "male", "concepts": ["C_no_such_thing"]}),
        json!({"gender": "male"}),
    ] {
        let (status, v) = post(&c, &server, "/v1/sessions", &bad);
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad} -> {v}");
        assert!(!error_kind(&v).is_empty());
    }
    let raw = c.post(server.url("/v1/sessions")).body("{not json").send().unwrap();
    assert_eq!(raw.status(), StatusCode::BAD_REQUEST);

    let answer = json!({"concept_id": "K0", "response": "yes"});
    let (status, v) = post(&c, &server, "/v1/sessions/0123456789abcdef0123456789abcdef/answer", &answer);
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_kind(&v), "unknown_session");
    assert_eq!(get(&c, &server, "/v1/sessions/nope/recommendation").0, StatusCode::NOT_FOUND);

    let reply = open(&c, &server, &app, &a.cfg.paths().ground_truth);
    let id = reply.session_id.clone();
    let q = reply.next_question.unwrap().concept_id;
    let (status, v) = get(&c, &server, &format!("/v1/sessions/{id}/recommendation"));
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    let wrong = json!({"concept_id": format!("{q}x"), "response": "no"});
    let (status, v) = post(&c, &server, &format!("/v1/sessions/{id}/answer"), &wrong);
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    assert_eq!(error_kind(&v), "protocol");
    let maybe = json!({"concept_id": q, "response": "maybe"});
    assert_eq!(post(&c, &server, &format!("/v1/sessions/{id}/answer"), &maybe).0, StatusCode::BAD_REQUEST);
    let (status, v) = post(&c, &server, &format!("/v1/sessions/{id}/answer"), &json!({"concept_id": q, "response": "no"}));
    assert_eq!(status, StatusCode::OK, "{v}");

    assert_eq!(get(&c, &server, "/v1/concepts/search?q=").0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&c, &server, "/v1/concepts/search").0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&c, &server, "/v1/nothing").0, StatusCode::NOT_FOUND);
}

#[test]
fn idle_sessions_answer_gone() {
    let a = artifacts(800, 6);
    let mut cfg = a.cfg.clone();
    cfg.service.session_ttl_secs = 0;
    let app = state(&cfg);
    let server = BackgroundServer::start(app.clone(), 1).unwrap();
    let c = client();
    let reply = open(&c, &server, &app, &cfg.paths().ground_truth);
    std::thread::sleep(Duration::from_millis(20));
    let q = reply.next_question.unwrap().concept_id;
    let path = format!("/v1/sessions/{}/answer", reply.session_id);
    let (status, v) = post(&c, &server, &path, &json!({"concept_id": q, "response": "no"}));
    assert_eq!(status, StatusCode::GONE, "{v}");
    assert_eq!(error_kind(&v), "expired_session");
    let (status, _) = get(&c, &server, &format!("/v1/sessions/{}/recommendation", reply.session_id));
    assert_eq!(status, StatusCode::GONE);
}

#[test]
fn http_sessions_match_the_in_process_engine() {
    let a = artifacts(2000, 8);
    let app = state(&a.cfg);
    let server = BackgroundServer::start(app.clone(), 2).unwrap();
    let c = client();
    let loaded = pipeline::load(&a.cfg).unwrap();
    let engine = loaded.engine(&a.cfg).unwrap();
    let truth = load_ground_truth(&a.cfg.paths().ground_truth).unwrap();
    let mut compared = 0;
    for case in truth.iter().take(150) {
        let Some(local) = scripted_session(&engine, case).unwrap() else { continue };
        let sc = script(&engine, case).unwrap();
        let (status, v) = post(
            &c,
            &server,
            "/v1/sessions",
            &json!({"age": sc.demographics.age, "gender": sc.demographics.gender, "concepts": sc.initial}),
        );
        assert_eq!(status, StatusCode::OK);
        let mut reply: SessionReply = serde_json::from_value(v).unwrap();
        let mut asked = Vec::new();
        while let Some(q) = reply.next_question.clone() {
            asked.push(q.concept_id.clone());
            let body = json!({"concept_id": q.concept_id, "response": sc.response(&q.concept_id).to_string()});
            let (status, v) = post(&c, &server, &format!("/v1/sessions/{}/answer", reply.session_id), &body);
            assert_eq!(status, StatusCode::OK, "{v}");
            reply = serde_json::from_value(v).unwrap();
        }
        let local_asked: Vec<String> = local.session.log.iter().map(|e| e.concept.clone()).collect();
        assert_eq!(asked, local_asked, "case {}", case.record.id);
        assert_eq!(reply.status, local.session.status);
        let remote = reply.recommendation.unwrap();
        assert_eq!(remote, local.recommendation, "case {}", case.record.id);
        let (status, body) = get(&c, &server, &format!("/v1/sessions/{}/recommendation", reply.session_id));
        assert_eq!(status, StatusCode::OK);
        let again: Recommendation = serde_json::from_str(&body).unwrap();
        assert_eq!(again, local.recommendation);
        compared += 1;
    }
    assert!(compared >= 100, "only {compared} sessions compared");
}

fn sha256sum(path: &std::path::Path) -> String {
    let out = Command::new("sha256sum").arg(path).output().unwrap();
    String::from_utf8(out.stdout).unwrap().split_whitespace().next().unwrap().to_string()
}

#[test]
fn health_search_and_restart_stability() {
    let a = artifacts(1000, 9);
    let c = client();
    let bodies = |cfg: &Config| {
        let server = BackgroundServer::start(Arc::new(AppState::from_config(cfg).unwrap()), 1).unwrap();
        ["/v1/health", "/v1/concepts/search?q=bauchweh", "/v1/concepts/search?q=bauchwhe", "/v1/concepts/search?q=zzzz", "/v1/concepts/search?q=kopf"]
            .map(|p| get(&c, &server, p))
    };
    let first = bodies(&a.cfg);
    let second = bodies(&a.cfg);
    assert_eq!(first, second);
    assert!(first.iter().all(|(s, _)| *s == StatusCode::OK));

    let health: Health = serde_json::from_str(&first[0].1).unwrap();
    assert_eq!(health.kg_sha256, sha256sum(&a.cfg.paths().kg));
    assert_eq!(health.ontology_sha256, sha256sum(&a.cfg.paths().ontology));
    assert_eq!(health.version, env!("CARGO_PKG_VERSION"));

    let loaded = pipeline::load(&a.cfg).unwrap();
    let want = loaded.ontology.resolve("C_abdominal_pain", None).unwrap();
    let exact: SearchReply = serde_json::from_str(&first[1].1).unwrap();
    assert_eq!(exact.candidates[0].concept_id, want);
    let typo: SearchReply = serde_json::from_str(&first[2].1).unwrap();
    assert_eq!(typo.candidates[0].concept_id, want);
    let none: SearchReply = serde_json::from_str(&first[3].1).unwrap();
    assert!(none.candidates.is_empty());
    let prefix: SearchReply = serde_json::from_str(&first[4].1).unwrap();
    assert!(!prefix.candidates.is_empty() && prefix.candidates.len() <= 10);
}

#[test]
fn missing_artifacts_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config {
        data_dir: dir.path().to_path_buf(),
        ..Config::default()
    };
    let msg = match AppState::from_config(&cfg) {
        Err(e) => e.to_string(),
        Ok(_) => panic!("empty directory loaded"),
    };
    for name in ["kg.snap", "ontology.tsv", "weights.json"] {
        assert!(msg.contains(name), "{msg}");
    }
}
