use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use oasrank::{build_index, BuildConfig, CorpusIndex};
use oasrank_server::api::{EndpointResponse, HealthResponse, QueryResponse};
use oasrank_server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn music() -> Arc<CorpusIndex> {
    static INDEX: OnceLock<Arc<CorpusIndex>> = OnceLock::new();
    INDEX
        .get_or_init(|| {
            let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/music");
            Arc::new(build_index(&dir, &BuildConfig::with_min_df(1)).unwrap())
        })
        .clone()
}

fn app() -> Router {
    router(AppState::new(Some(music())))
}

async fn send(app: Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

fn post(body: impl Into<Body>, content_type: &str) -> Request<Body> {
    Request::post("/v1/query")
        .header(header::CONTENT_TYPE, content_type)
        .body(body.into())
        .unwrap()
}

fn post_json(body: &Value) -> Request<Body> {
    post(serde_json::to_vec(body).unwrap(), "application/json")
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn indexed_endpoint_ranks_itself_first() {
    let index = music();
    let id = index.id_of("/albums/{albumId}/songs").unwrap();
    let record = index.record(id).unwrap();
    let draft = json!({
        "endpoint_name": record.name,
        "path_item": record.fragment.path_item,
        "definitions": record.fragment.definitions,
    });
    let (status, body) = send(app(), post_json(&json!({"draft": draft, "top_k": 3}))).await;
    assert_eq!(status, StatusCode::OK);
    let res: QueryResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(res.results.len(), 3);
    let top = &res.results[0];
    assert_eq!(top.result.endpoint_id, id);
    assert_eq!(top.result.normalized_probability, 1.0);
    assert!(top.preview.contains("/albums/{albumId}/songs"));
    let sum: f64 = top.result.feature_breakdown.values().sum();
    assert!((sum - top.result.raw_score).abs() < 1e-12);
}

#[tokio::test]
async fn song_album_draft_finds_music_endpoints() {
    let yaml = "draft: |\n  /songs/{id}/album:\n    get:\n      summary: get album of a song\ntop_k: 4\n";
    let (status, body) = send(app(), post(yaml, "application/yaml")).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let res: QueryResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(res.query, "/songs/{id}/album");
    assert_eq!(res.results[0].result.name, "/songs/{songId}/album");
    let names: Vec<&str> = res.results.iter().map(|r| r.result.name.as_str()).collect();
    assert!(names.iter().all(|n| n.starts_with("/songs") || n.starts_with("/albums")), "{names:?}");
}

#[tokio::test]
async fn identical_requests_identical_responses() {
    let req = json!({"draft": {"/shows": {"get": {"summary": "list podcast shows"}}}});
    let (_, a) = send(app(), post_json(&req)).await;
    let (_, b) = send(app(), post_json(&req)).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn config_override_changes_features() {
    let req = json!({
        "draft": {"/artist/{id}": {"get": {}}},
        "config_override": {"enabled_features": ["fuzzy"]}
    });
    let (status, body) = send(app(), post_json(&req)).await;
    assert_eq!(status, StatusCode::OK);
    let res: QueryResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(res.config.weights.len(), 1);
    assert_eq!(res.results[0].result.name, "/artists/{artistId}");
    assert!(res.results[0].result.feature_scores.keys().eq(["fuzzy"]));

    let bad = json!({"draft": {"/a": {}}, "config_override": {"enabled_features": []}});
    assert_eq!(send(app(), post_json(&bad)).await.0, StatusCode::BAD_REQUEST);
    let dense = json!({"draft": {"/a": {}}, "config_override": {"text_featurization": "enriched"}});
    assert_eq!(send(app(), post_json(&dense)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_bodies_are_rejected() {
    let (status, body) = send(app(), post("{\"draft\": [", "application/json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["error"], "unparsable_draft");

    let (status, _) = send(app(), post_json(&json!({"draft": 42}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(app(), post_json(&json!({"draft": "{ nope: ["}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(app(), post_json(&json!({"draft": {"/a": {}}, "top_k": 0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(app(), post("draft: {}", "text/plain")).await;
    assert_eq!(status, StatusCode::UNSUPPORTED_MEDIA_TYPE);
}

#[tokio::test]
async fn top_k_is_clamped() {
    let state = AppState {
        top_k_max: 2,
        ..AppState::new(Some(music()))
    };
    let req = json!({"draft": {"/songs": {}}, "top_k": 50});
    let (_, body) = send(router(state), post_json(&req)).await;
    let res: QueryResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(res.top_k, 2);
    assert_eq!(res.results.len(), 2);
}

#[tokio::test]
async fn endpoint_lookup() {
    let index = music();
    let id = index.id_of("/songs").unwrap();
    let (status, body) = send(app(), get(&format!("/v1/endpoints/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    let res: EndpointResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(res.record.name, "/songs");
    assert_eq!(res.record.source_spec_ids, ["records.yaml", "tunes.json"]);

    assert_eq!(send(app(), get("/v1/endpoints/11")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(app(), get("/v1/endpoints/songs")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn health_reports_build_stats() {
    let (status, body) = send(app(), get("/v1/health")).await;
    assert_eq!(status, StatusCode::OK);
    let res: HealthResponse = serde_json::from_slice(&body).unwrap();
    let stats = res.stats.unwrap();
    let index = music();
    assert_eq!(stats.endpoints, 11);
    assert_eq!(stats.endpoints, index.report.endpoints);
    assert_eq!(stats.files_parsed, index.report.files_parsed);
    assert_eq!(stats.files_skipped, index.report.skipped.len());
    assert_eq!(stats.tree_vocab, index.tree_vocab.len());
    assert_eq!(stats.format_version, 1);
}

#[tokio::test]
async fn no_index_is_unavailable() {
    let app = || router(AppState::new(None));
    assert_eq!(send(app(), get("/v1/health")).await.0, StatusCode::SERVICE_UNAVAILABLE);
    let (status, body) = send(app(), post_json(&json!({"draft": {"/a": {}}}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["error"], "index_not_loaded");
    assert_eq!(send(app(), get("/v1/endpoints/0")).await.0, StatusCode::SERVICE_UNAVAILABLE);
}
