//! axum routes over [`crate::api::handle_map`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;

use crate::api::{handle_map, parse_request, ServiceContext, ServiceError};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ServiceError::Malformed { path, message } => {
                (StatusCode::BAD_REQUEST, json!({"error": "malformed_request", "path": path, "message": message}))
            }
            ServiceError::Invalid(msg) => (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "invalid_request", "message": msg})),
            ServiceError::UnknownScenario(name) => {
                (StatusCode::NOT_FOUND, json!({"error": "unknown_scenario", "message": self.to_string(), "scenario": name}))
            }
            ServiceError::NoModel => (StatusCode::CONFLICT, json!({"error": "no_model", "message": self.to_string()})),
        };
        (status, Json(body)).into_response()
    }
}

async fn map(State(ctx): State<Arc<ServiceContext>>, body: Bytes) -> Result<Response, ServiceError> {
    let req = parse_request(&body)?;
    let resp = handle_map(&req, &ctx)?;
    Ok(Json(resp).into_response())
}

async fn health(State(ctx): State<Arc<ServiceContext>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "scenarios": ctx.scenarios.keys().collect::<Vec<_>>(),
        "model_loaded": ctx.model.is_some(),
    }))
}

pub fn router(ctx: Arc<ServiceContext>) -> Router {
    Router::new().route("/map", post(map)).route("/health", get(health)).with_state(ctx)
}

/// Serves on an already bound listener until the process is stopped.
pub async fn serve(listener: TcpListener, ctx: Arc<ServiceContext>) -> std::io::Result<()> {
    axum::serve(listener, router(ctx)).await
}
