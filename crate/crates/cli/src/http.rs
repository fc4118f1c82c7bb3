//! HTTP API over an immutable engine. Every endpoint lives under `/api` and
//! answers JSON.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use expertfind_core::engine::Engine;
use expertfind_core::error::{Error, ErrorCategory};
use expertfind_core::fusion::FusionMethod;
use serde::Serialize;
use serde_json::json;
use tower_http::cors::CorsLayer;

type Params = Query<HashMap<String, String>>;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match self.0.category() {
            ErrorCategory::Usage => (StatusCode::BAD_REQUEST, "bad_request"),
            ErrorCategory::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ErrorCategory::NoMatch => (StatusCode::UNPROCESSABLE_ENTITY, "no_topical_match"),
            ErrorCategory::MissingStage | ErrorCategory::Data => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        let body = json!({ "error": { "kind": kind, "message": self.0.to_string() } });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError(Error::InvalidArgument(msg.into()))
}

fn query_text(params: &HashMap<String, String>) -> std::result::Result<&str, ApiError> {
    match params.get("q").map(|q| q.trim()) {
        Some(q) if !q.is_empty() => Ok(q),
        _ => Err(ApiError(Error::EmptyQuery)),
    }
}

fn limit(params: &HashMap<String, String>, default: usize) -> std::result::Result<usize, ApiError> {
    match params.get("limit") {
        None => Ok(default),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(bad(format!("`limit` must be a positive integer, got `{v}`"))),
        },
    }
}

async fn search(State(engine): State<Arc<Engine>>, Query(params): Params) -> Response {
    let run = || -> ApiResult<_> {
        let q = query_text(&params)?;
        let strategy = engine.strategy(params.get("strategy").map(String::as_str))?;
        let n = limit(&params, engine.config().result_limit)?;
        Ok(Json(engine.search(q, &strategy, n)?))
    };
    run().into_response()
}

async fn explain(State(engine): State<Arc<Engine>>, Query(params): Params) -> Response {
    let run = || -> ApiResult<_> {
        let q = query_text(&params)?;
        let author = params
            .get("author")
            .filter(|a| !a.is_empty())
            .ok_or_else(|| bad("missing `author`"))?;
        let strategy = engine.strategy(params.get("strategy").map(String::as_str))?;
        Ok(Json(engine.explain(q, author, &strategy)?))
    };
    run().into_response()
}

async fn author(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Response {
    engine
        .author(&id)
        .map(Json)
        .map_err(ApiError)
        .into_response()
}

async fn profile(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Response {
    engine
        .profile(&id)
        .map(|p| Json(p.clone()))
        .map_err(ApiError)
        .into_response()
}

async fn documents(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Response {
    engine
        .documents(&id)
        .map(|docs| Json(docs.into_iter().cloned().collect::<Vec<_>>()))
        .map_err(ApiError)
        .into_response()
}

#[derive(Serialize)]
struct StrategyOptions {
    default: String,
    schemes: [&'static str; 4],
    doc_fusions: [&'static str; 4],
    exact_methods: [&'static str; 3],
    related_methods: [&'static str; 3],
    scalings: [&'static str; 4],
    aggregations: [&'static str; 2],
    fusion_methods: Vec<&'static str>,
}

async fn strategies(State(engine): State<Arc<Engine>>) -> Json<StrategyOptions> {
    Json(StrategyOptions {
        default: engine.default_strategy().to_string(),
        schemes: ["tfidf", "bm25", "lm-dirichlet", "lm-jm"],
        doc_fusions: ["meank", "max", "rr", "combnz"],
        exact_methods: ["ec-iaf", "ef-iaf", "rec-iaf"],
        related_methods: ["aer", "raer", "aes"],
        scalings: ["identity", "sigmoid", "sqrt", "square"],
        aggregations: ["max", "mean"],
        fusion_methods: FusionMethod::ALL.iter().map(|m| m.as_str()).collect(),
    })
}

pub fn router(engine: Arc<Engine>) -> Router {
    let dev = engine.config().dev_mode;
    let api = Router::new()
        .route("/api/search", get(search))
        .route("/api/explain", get(explain))
        .route("/api/strategies", get(strategies))
        .route("/api/authors/{id}", get(author))
        .route("/api/authors/{id}/profile", get(profile))
        .route("/api/authors/{id}/documents", get(documents))
        .with_state(engine);
    if dev {
        api.layer(CorsLayer::permissive())
    } else {
        api
    }
}

pub async fn serve(engine: Arc<Engine>) -> std::io::Result<()> {
    let addr = format!("{}:{}", engine.config().host, engine.config().port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
