//! HTTP service for the explorer UI.
//!
//! The network is loaded once and shared read-only; evidence travels in each
//! request, so handlers keep no state between calls.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use gridbn_core::{AvailabilityProfile, ClassificationPresets, CostTable, Evidence, Network};

use crate::api::{self, OptimizeRequest, PosteriorRequest, ReportOptions};
use crate::error::{ApiError, Kind};

pub struct AppState {
    pub network: Network,
    pub costs: Option<CostTable>,
    pub profiles: BTreeMap<String, AvailabilityProfile>,
    pub presets: ClassificationPresets,
}

impl AppState {
    pub fn new(network: Network, costs: Option<CostTable>) -> Self {
        let mut profiles = BTreeMap::new();
        profiles.insert("default".to_string(), api::default_profile());
        AppState {
            network,
            costs,
            profiles,
            presets: api::default_classification(),
        }
    }
}

struct Failure(ApiError);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = match (self.0.kind, self.0.code) {
            (_, "not_found") => StatusCode::NOT_FOUND,
            (Kind::Usage, _) => StatusCode::BAD_REQUEST,
            (Kind::Domain, _) => StatusCode::UNPROCESSABLE_ENTITY,
            (Kind::Internal, _) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.0.body())).into_response()
    }
}

type Reply<T> = Result<Json<T>, Failure>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::usage("invalid_json", format!("request body: {e}")))
}

async fn blocking<T, F>(f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => Ok(Json(result?)),
        Err(e) => Err(Failure(ApiError {
            kind: Kind::Internal,
            code: "internal",
            message: format!("worker failed: {e}"),
        })),
    }
}

async fn network(State(state): State<Arc<AppState>>) -> Json<api::NetworkView> {
    Json(api::network_view(&state.network))
}

async fn posteriors(State(state): State<Arc<AppState>>, body: Bytes) -> Reply<api::PosteriorResponse> {
    let request: PosteriorRequest = parse(&body)?;
    blocking(move || api::posteriors(&state.network, &request)).await
}

async fn optimize(State(state): State<Arc<AppState>>, body: Bytes) -> Reply<api::OptimizeResponse> {
    let request: OptimizeRequest = parse(&body)?;
    let target = request.target.resolve()?;
    let costs = match (request.costs, request.costs_ref.as_deref()) {
        (Some(_), Some(_)) => {
            return Err(ApiError::usage("invalid_request", "give either costs or costs_ref, not both").into())
        }
        (Some(c), None) => c,
        (None, Some("default")) | (None, None) => state.costs.clone().ok_or_else(|| {
            ApiError::domain("no_default_costs", "the service was started without a cost table")
        })?,
        (None, Some(other)) => {
            return Err(ApiError::usage("unknown_costs_ref", format!("unknown cost table `{other}`")).into())
        }
    };
    blocking(move || api::optimize_plan(&state.network, &target, request.weights, &costs)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportQuery {
    profile: Option<String>,
    preset: Option<String>,
    import_gw: Option<f64>,
}

async fn availability(
    State(state): State<Arc<AppState>>,
    query: Result<Query<ReportQuery>, QueryRejection>,
) -> Reply<api::ReportResponse> {
    let Query(query) = query.map_err(|e| ApiError::usage("invalid_query", e.body_text()))?;
    let name = query.profile.unwrap_or_else(|| "default".into());
    if !state.profiles.contains_key(&name) {
        return Err(ApiError::usage(
            "unknown_profile",
            format!(
                "unknown availability profile `{name}` (available: {})",
                state.profiles.keys().cloned().collect::<Vec<_>>().join(", ")
            ),
        )
        .into());
    }
    blocking(move || {
        let options = ReportOptions {
            presets: &state.presets,
            preset: query.preset.as_deref(),
            profile: &state.profiles[&name],
            import_gw: query.import_gw,
        };
        api::report(&state.network, &Evidence::new(), &options)
    })
    .await
}

async fn not_found() -> Failure {
    Failure(ApiError::usage("not_found", "no such endpoint"))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/network", get(network))
        .route("/api/posteriors", post(posteriors))
        .route("/api/optimize", post(optimize))
        .route("/api/report/availability", get(availability))
        .fallback(not_found)
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
