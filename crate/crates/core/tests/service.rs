mod common;

use std::sync::Arc;

use abstract_mining::medline::parse_medline;
use abstract_mining::report::{render_cluster_html, report_filename};
use abstract_mining::service::{router, AppState, ManualClock, ServiceConfig};
use abstract_mining::session::{Session, SessionConfig};
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeDelta, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const BOUNDARY: &str = "XyZboundary42";

fn multipart(file: &[u8], fields: &[(&str, &str)]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").bytes(),
        );
    }
    body.extend(
        format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"medline\"; filename=\"sample.medline\"\r\n\
             Content-Type: text/plain\r\n\r\n"
        )
        .bytes(),
    );
    body.extend_from_slice(file);
    body.extend(format!("\r\n--{BOUNDARY}--\r\n").bytes());
    body
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, _, bytes) = send_raw(app, method, uri, body).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn send_raw(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, bytes)
}

async fn create(app: &Router, file: &[u8], fields: &[(&str, &str)]) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(Method::POST)
        .uri("/api/session")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(file, fields)))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn app() -> Router {
    router(AppState::new(ServiceConfig::default()))
}

async fn new_session(app: &Router, fields: &[(&str, &str)]) -> String {
    let (status, body) = create(app, &common::sample_bytes(), fields).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn upload_returns_default_panel() {
    let app = app();
    let (status, body) = create(&app, &common::sample_bytes(), &[]).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["clusters"].as_array().unwrap().len(), 6);
    assert_eq!(body["selected_cluster"], 1);
    assert_eq!(body["max_k"], 9);
    assert_eq!(body["document_count"], 10);
    assert_eq!(body["ingest"]["kept"], 10);
    assert_eq!(body["ingest"]["dropped_no_abstract"], 1);
    let sizes: u64 = body["clusters"].as_array().unwrap().iter().map(|c| c["size"].as_u64().unwrap()).sum();
    assert_eq!(sizes, 10);
    for (i, c) in body["clusters"].as_array().unwrap().iter().enumerate() {
        assert_eq!(c["cluster"], i + 1);
        assert!(c["words"].as_array().unwrap().len() <= 6);
    }
}

#[tokio::test]
async fn panel_matches_library() {
    let app = app();
    let id = new_session(&app, &[("k", "3"), ("seed", "7")]).await;
    let (_, view) = send(&app, Method::GET, &format!("/api/session/{id}/clusters"), None).await;
    let (corpus, _) = parse_medline(&common::sample_bytes(), "sample.medline").unwrap();
    let s = Session::new(corpus, 3, &SessionConfig { seed: 7, ..SessionConfig::default() }).unwrap();
    assert_eq!(view["clusters"], serde_json::to_value(s.summaries()).unwrap());
}

#[tokio::test]
async fn bad_uploads_are_rejected() {
    let app = app();
    let (status, body) = create(&app, b"", &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "empty_input");
    let (status, body) = create(&app, b"PMID- 1\nTI  - no abstract\n", &[]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "no_valid_records");
    let (status, body) = create(&app, &common::sample_bytes(), &[("k", "10")]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "k_out_of_range");
    let (status, body) = create(&app, &common::sample_bytes(), &[("k", "three")]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "bad_field");
}

#[tokio::test]
async fn state_machine_errors_map_to_statuses() {
    let app = app();
    let id = new_session(&app, &[("k", "9")]).await;
    let (status, body) = send(&app, Method::POST, &format!("/api/session/{id}/back"), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("at_root")));

    // k = n - 1 leaves exactly one pair and eight singletons
    let (_, view) = send(&app, Method::GET, &format!("/api/session/{id}/clusters"), None).await;
    let single = view["clusters"].as_array().unwrap().iter().find(|c| c["size"] == 1).unwrap()["cluster"].clone();
    let (status, _) =
        send(&app, Method::POST, &format!("/api/session/{id}/select"), Some(json!({"cluster": single}))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = send(&app, Method::POST, &format!("/api/session/{id}/use-cluster"), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("singleton_cluster")));

    let (status, body) =
        send(&app, Method::POST, &format!("/api/session/{id}/update"), Some(json!({"k": 10, "exclude_words": []})))
            .await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("k_out_of_range")));

    let (status, body) =
        send(&app, Method::POST, &format!("/api/session/{id}/select"), Some(json!({"cluster": 0}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("cluster_out_of_range")));

    let (status, body) = send(&app, Method::GET, "/api/session/nope/clusters", None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("session_not_found")));
}

#[tokio::test]
async fn update_drill_and_back() {
    let app = app();
    let id = new_session(&app, &[("k", "3")]).await;
    let (status, view) =
        send(&app, Method::POST, &format!("/api/session/{id}/update"), Some(json!({"exclude_words": ["AIR"]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["document_count"], 8);
    assert_eq!(view["k"], 3);
    assert_eq!(view["exclude_words"], json!(["air"]));
    assert_eq!(view["history_depth"], 1);

    let big = view["clusters"].as_array().unwrap().iter().max_by_key(|c| c["size"].as_u64()).unwrap().clone();
    let (_, selected) =
        send(&app, Method::POST, &format!("/api/session/{id}/select"), Some(json!({"cluster": big["cluster"]}))).await;
    assert_eq!(selected["documents"].as_array().unwrap().len() as u64, big["size"].as_u64().unwrap());
    let (status, drilled) = send(&app, Method::POST, &format!("/api/session/{id}/use-cluster"), None).await;
    if status == StatusCode::OK {
        assert_eq!(drilled["document_count"], big["size"]);
        let (_, back) = send(&app, Method::POST, &format!("/api/session/{id}/back"), None).await;
        assert_eq!(back["document_count"], 8);
        assert_eq!(back["selected_cluster"], big["cluster"]);
    }
    let (_, root) = send(&app, Method::POST, &format!("/api/session/{id}/back"), None).await;
    assert_eq!(root["document_count"], 8);
    assert_eq!(root["can_go_back"], false);
}

#[tokio::test]
async fn pager_titles_and_report() {
    let app = app();
    let id = new_session(&app, &[("k", "2")]).await;
    let (_, docs) = send(&app, Method::GET, &format!("/api/session/{id}/cluster/1/documents"), None).await;
    let docs = docs["documents"].as_array().unwrap().clone();
    for (pos, d) in docs.iter().enumerate() {
        let (status, a) = send(&app, Method::GET, &format!("/api/session/{id}/cluster/1/abstract/{pos}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(a["pmid"], d["pmid"]);
        assert_eq!(a["total"], docs.len());
        assert!(!a["abstract"].as_str().unwrap().is_empty());
    }
    let (status, body) =
        send(&app, Method::GET, &format!("/api/session/{id}/cluster/1/abstract/{}", docs.len()), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::RANGE_NOT_SATISFIABLE, Some("position_out_of_range")));

    let (_, titles) = send(&app, Method::GET, &format!("/api/session/{id}/cluster/1/titles"), None).await;
    let pmids: Vec<&Value> = titles["rows"].as_array().unwrap().iter().map(|r| &r["pmid"]).collect();
    assert_eq!(pmids, docs.iter().map(|d| &d["pmid"]).collect::<Vec<_>>());

    let (status, headers, html) =
        send_raw(&app, Method::GET, &format!("/api/session/{id}/cluster/1/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/html"));
    assert_eq!(
        headers[header::CONTENT_DISPOSITION].to_str().unwrap(),
        format!("attachment; filename=\"{}\"", report_filename("sample.medline", 1))
    );
    let html = String::from_utf8(html).unwrap();
    let again = send_raw(&app, Method::GET, &format!("/api/session/{id}/cluster/1/report"), None).await.2;
    assert_eq!(html.as_bytes(), again);
    for d in &docs {
        assert!(html.contains(&format!("<b>PMID:</b> {} ", d["pmid"])));
    }
    let (status, _) = send(&app, Method::GET, &format!("/api/session/{id}/cluster/3/report"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn report_body_equals_library_render() {
    let start = Utc.with_ymd_and_hms(2021, 3, 4, 5, 6, 7).unwrap();
    let clock = Arc::new(ManualClock::new(start));
    let app = router(AppState::with_clock(ServiceConfig::default(), clock));
    let id = new_session(&app, &[("k", "2")]).await;
    let html = send_raw(&app, Method::GET, &format!("/api/session/{id}/cluster/2/report"), None).await.2;
    let (corpus, _) = parse_medline(&common::sample_bytes(), "sample.medline").unwrap();
    let s = Session::new(corpus, 2, &SessionConfig::default()).unwrap();
    assert_eq!(String::from_utf8(html).unwrap(), render_cluster_html(&s, 2, start).unwrap());
}

#[tokio::test]
async fn idle_sessions_expire() {
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()));
    let config = ServiceConfig { session_ttl: std::time::Duration::from_secs(60), ..ServiceConfig::default() };
    let state = AppState::with_clock(config, clock.clone());
    let app = router(state.clone());
    let keep = new_session(&app, &[]).await;
    let drop = new_session(&app, &[]).await;
    clock.advance(TimeDelta::seconds(45));
    assert_eq!(send(&app, Method::GET, &format!("/api/session/{keep}/clusters"), None).await.0, StatusCode::OK);
    clock.advance(TimeDelta::seconds(45));
    assert_eq!(state.registry.sweep(), 1);
    assert_eq!(send(&app, Method::GET, &format!("/api/session/{keep}/clusters"), None).await.0, StatusCode::OK);
    assert_eq!(send(&app, Method::GET, &format!("/api/session/{drop}/clusters"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_are_serialized() {
    let app = app();
    let id = new_session(&app, &[("k", "2")]).await;
    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        let uri = format!("/api/session/{id}/update");
        tasks.push(tokio::spawn(async move {
            send(&app, Method::POST, &uri, Some(json!({"k": 1 + i % 3, "exclude_words": []}))).await
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let (_, view) = send(&app, Method::GET, &format!("/api/session/{id}/clusters"), None).await;
    assert_eq!(view["history_depth"], 16);
    // unwinding visits 16 consistent frames and ends at the root
    for _ in 0..16 {
        let (status, v) = send(&app, Method::POST, &format!("/api/session/{id}/back"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["clusters"].as_array().unwrap().len() as u64, v["k"].as_u64().unwrap());
    }
    let (_, root) = send(&app, Method::GET, &format!("/api/session/{id}/clusters"), None).await;
    assert_eq!((root["k"].as_u64(), root["history_depth"].as_u64()), (Some(2), Some(0)));
}

#[tokio::test]
async fn sessions_are_independent() {
    let app = app();
    let a = new_session(&app, &[("k", "2")]).await;
    let b = new_session(&app, &[("k", "2")]).await;
    assert_ne!(a, b);
    send(&app, Method::POST, &format!("/api/session/{a}/update"), Some(json!({"k": 4, "exclude_words": ["rats"]})))
        .await;
    let (_, vb) = send(&app, Method::GET, &format!("/api/session/{b}/clusters"), None).await;
    assert_eq!((vb["k"].as_u64(), vb["document_count"].as_u64()), (Some(2), Some(10)));
}
