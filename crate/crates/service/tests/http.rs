use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use vnfmap_core::agents::AgentVariant;
use vnfmap_core::experiment::train;
use vnfmap_core::mdp::Hyperparameters;
use vnfmap_core::scenario::Scenario;
use vnfmap_service::{router, ServiceContext};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn context() -> ServiceContext {
    let mut ctx = ServiceContext::default();
    let skipped = ctx.load_scenarios(&fixtures()).unwrap();
    assert!(skipped.iter().all(|s| s.ends_with(".oracle.json")), "{skipped:?}");
    ctx
}

async fn send(ctx: ServiceContext, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(Arc::new(ctx)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn recorded_vms(objective: &str) -> Vec<Value> {
    let text = std::fs::read_to_string(fixtures().join("canonical_seed42.oracle.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    v[objective]["pairs"].as_array().unwrap().iter().map(|p| p["vm"].clone()).collect()
}

#[tokio::test]
async fn oracle_on_canonical_fixture_returns_recorded_assignment() {
    for objective in ["absolute_surplus", "normalized_surplus"] {
        let body = json!({"scenario": "canonical_seed42", "policy": {"kind": "oracle"}, "objective": objective}).to_string();
        let (status, v) = send(context(), "POST", "/map", &body).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        assert_eq!(v["status"], "mapped");
        let vms: Vec<Value> = v["pairs"].as_array().unwrap().iter().map(|p| p["vm"].clone()).collect();
        assert_eq!(vms, recorded_vms(objective));
        assert!(v["pairs"][0]["wastage"]["compute_surplus"].is_number());
    }
}

#[tokio::test]
async fn inline_documents_match_named_scenario() {
    let s = Scenario::load(fixtures().join("canonical_seed42.json")).unwrap();
    let body = json!({
        "vnfcs": {"components": s.slice.components()},
        "inventory": {"vms": s.vms},
        "policy": {"kind": "oracle"},
    })
    .to_string();
    let (status, v) = send(context(), "POST", "/map", &body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["objective_value"], 5.0);
}

#[tokio::test]
async fn undersized_inventory_is_infeasible_citing_capacity_fit() {
    let s = Scenario::load(fixtures().join("canonical_seed42.json")).unwrap();
    let vms: Vec<Value> = (1..=12).map(|id| json!({"id": id, "compute_cap": 4.0, "storage_cap": 10.0})).collect();
    let body = json!({"vnfcs": {"components": s.slice.components()}, "inventory": {"vms": vms}, "policy": {"kind": "oracle"}})
        .to_string();
    let (status, v) = send(context(), "POST", "/map", &body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "infeasible");
    assert_eq!(v["violated_constraint"], "capacity_fit");
    assert!(v["detail"].as_str().unwrap().contains("f1"), "{v}");
    assert!(v["pairs"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn greedy_on_identity_fixture_has_zero_wastage() {
    let body = json!({"scenario": "identity", "policy": {"kind": "greedy"}}).to_string();
    let (status, v) = send(context(), "POST", "/map", &body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "mapped");
    assert_eq!(v["objective_value"], 0.0);
    let vms: Vec<u64> = v["pairs"].as_array().unwrap().iter().map(|p| p["vm"].as_u64().unwrap()).collect();
    assert_eq!(vms, (1..=8).collect::<Vec<_>>());
}

#[tokio::test]
async fn malformed_body_reports_field_path() {
    let body = r#"{"inventory": {"vms": [{"id": 1, "compute_cap": 2, "storage_cap": 2},
        {"id": 2, "compute_cap": "big", "storage_cap": 2}]}, "policy": {"kind": "oracle"}}"#;
    let (status, v) = send(context(), "POST", "/map", body).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "inventory.vms[1].compute_cap");

    let (status, v) = send(context(), "POST", "/map", r#"{"scenario": "identity", "policy": {"kind": "psychic"}}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["path"], "policy.kind");
}

#[tokio::test]
async fn invalid_documents_are_rejected() {
    let (status, v) = send(context(), "POST", "/map", r#"{"policy": {"kind": "oracle"}}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (status, _) = send(context(), "POST", "/map", r#"{"scenario": "nope", "policy": {"kind": "oracle"}}"#).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn oracle_responses_are_idempotent() {
    let body = json!({"scenario": "canonical_seed42", "policy": {"kind": "oracle"}, "objective": "normalized_surplus"}).to_string();
    let (_, a) = send(context(), "POST", "/map", &body).await;
    let (_, b) = send(context(), "POST", "/map", &body).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn trained_agent_requires_a_model_and_uses_it() {
    let body = json!({"scenario": "identity", "policy": {"kind": "trained_agent"}}).to_string();
    let (status, _) = send(context(), "POST", "/map", &body).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let s = Scenario::load(fixtures().join("identity.json")).unwrap();
    let env = s.environment().unwrap();
    let hyper = Hyperparameters { episodes: 50, ..Default::default() };
    let out = train(&env, AgentVariant::OffPolicyLinear, &hyper, 3).unwrap();
    let mut ctx = context();
    ctx.model = Some(out.learner.to_model());
    let (status, v) = send(ctx, "POST", "/map", &body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["policy"]["kind"], "trained_agent");
    assert!(v["status"] == "mapped" || v["violated_constraint"].is_string());
}

#[tokio::test]
async fn health_lists_loaded_artifacts() {
    let (status, v) = send(context(), "GET", "/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model_loaded"], false);
    assert_eq!(v["scenarios"], json!(["canonical_seed42", "identity"]));
}
