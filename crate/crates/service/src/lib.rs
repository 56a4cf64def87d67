//! Request/response loop: resolve the conditions at a vehicle position,
//! score them with the production model and attach the decision-tree
//! second opinion.

use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use incident_core::datagen::Stores;
use incident_core::domain::{check_coordinates, Car2XEvent, FeatureRecord, Timestamp};
use incident_core::geomatch::{DropReason, MatchCaps, Matcher};
use incident_core::models::{Family, TrainedModel};

pub const DEFAULT_THRESHOLD: f64 = 0.65;
pub const MAX_PATH_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRequest {
    pub latitude: f64,
    pub longitude: f64,
    /// UTC seconds; the server clock when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStepView {
    pub feature: String,
    /// `"<="` or `">"`.
    pub comparison: String,
    pub threshold: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub probability: f64,
    pub classification: bool,
    pub threshold: f64,
    pub model_version: String,
    pub second_opinion: Vec<PathStepView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_version: String,
    pub weather_freshness: Option<Timestamp>,
    pub traffic_freshness: Option<Timestamp>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conditions unavailable: {}", .0.as_str())]
    ConditionUnavailable(DropReason),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::ConditionUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let reason = match &self {
            ServiceError::ConditionUnavailable(r) => Some(r.as_str().to_string()),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            reason,
        };
        (self.status(), Json(body)).into_response()
    }
}

/// Source of the current conditions at a position.
pub trait ConditionProvider: Send + Sync {
    /// Matched record for a hypothetical event at the position; the label is
    /// always `false`.
    fn lookup_conditions(
        &self,
        latitude: f64,
        longitude: f64,
        timestamp: Timestamp,
    ) -> Result<FeatureRecord, DropReason>;

    /// Latest weather and traffic timestamps available.
    fn freshness(&self) -> (Option<Timestamp>, Option<Timestamp>);
}

/// Serves conditions from a loaded snapshot of the stores, with the same
/// join rules as offline matching.
pub struct SnapshotProvider {
    matcher: Matcher,
}

impl SnapshotProvider {
    pub fn new(matcher: Matcher) -> Self {
        SnapshotProvider { matcher }
    }

    pub fn from_stores(stores: &Stores, caps: MatchCaps) -> incident_core::Result<Self> {
        Ok(Self::new(Matcher::new(
            &stores.weather,
            &stores.roads,
            &stores.traffic,
            caps,
        )?))
    }
}

impl ConditionProvider for SnapshotProvider {
    fn lookup_conditions(
        &self,
        latitude: f64,
        longitude: f64,
        timestamp: Timestamp,
    ) -> Result<FeatureRecord, DropReason> {
        self.matcher.match_event(&Car2XEvent {
            event_id: 0,
            latitude,
            longitude,
            timestamp,
            is_emergency_braking: false,
        })
    }

    fn freshness(&self) -> (Option<Timestamp>, Option<Timestamp>) {
        self.matcher.freshness()
    }
}

/// The production model, optional second-opinion tree and threshold.
#[derive(Debug)]
pub struct Predictor {
    model: TrainedModel,
    second_opinion: Option<TrainedModel>,
    threshold: f64,
    model_version: String,
}

impl Predictor {
    pub fn new(
        model: TrainedModel,
        second_opinion: Option<TrainedModel>,
        threshold: f64,
        model_version: impl Into<String>,
    ) -> incident_core::Result<Self> {
        use incident_core::Error;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold {threshold} outside [0, 1]")));
        }
        if let Some(dt) = &second_opinion {
            if dt.family() != Family::Tree {
                return Err(Error::Config(format!(
                    "second opinion must be a decision tree, got {}",
                    dt.family()
                )));
            }
            if dt.schema_id != model.schema_id {
                return Err(Error::SchemaMismatch {
                    expected: model.schema_id.to_string(),
                    given: dt.schema_id.to_string(),
                });
            }
        }
        Ok(Predictor {
            model,
            second_opinion,
            threshold,
            model_version: model_version.into(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    /// Scores one matched record.
    pub fn predict_record(&self, record: &FeatureRecord) -> Result<PredictionResponse, ServiceError> {
        let internal = |e: incident_core::Error| ServiceError::Internal(e.to_string());
        let x = self.model.schema.encode(record).map_err(internal)?;
        let probability = self.model.predict_proba(&x).map_err(internal)?;
        let mut second_opinion = Vec::new();
        if let Some(dt) = &self.second_opinion {
            let names = dt.schema.names();
            let steps = dt.decision_path(&x).map_err(internal)?.unwrap_or_default();
            second_opinion = steps
                .into_iter()
                .take(MAX_PATH_STEPS)
                .map(|s| PathStepView {
                    feature: names[s.feature].clone(),
                    comparison: if s.went_left { "<=" } else { ">" }.to_string(),
                    threshold: s.threshold,
                    value: s.value,
                })
                .collect();
        }
        Ok(PredictionResponse {
            probability,
            classification: probability >= self.threshold,
            threshold: self.threshold,
            model_version: self.model_version.clone(),
            second_opinion,
        })
    }
}

/// Shared state: the condition provider and an atomically replaceable
/// predictor.
pub struct AppState {
    predictor: RwLock<Arc<Predictor>>,
    provider: Arc<dyn ConditionProvider>,
}

impl AppState {
    pub fn new(predictor: Predictor, provider: Arc<dyn ConditionProvider>) -> Self {
        AppState {
            predictor: RwLock::new(Arc::new(predictor)),
            provider,
        }
    }

    pub fn predictor(&self) -> Arc<Predictor> {
        self.predictor.read().expect("predictor lock poisoned").clone()
    }

    /// Replaces the predictor; requests in flight keep the one they started with.
    pub fn swap_predictor(&self, next: Predictor) {
        *self.predictor.write().expect("predictor lock poisoned") = Arc::new(next);
    }

    pub fn handle_predict(&self, request: &PredictionRequest) -> Result<PredictionResponse, ServiceError> {
        check_coordinates(request.latitude, request.longitude)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let timestamp = request.timestamp.unwrap_or_else(now);
        let record = self
            .provider
            .lookup_conditions(request.latitude, request.longitude, timestamp)
            .map_err(|reason| match reason {
                DropReason::InvalidPosition => ServiceError::BadRequest("invalid position".into()),
                other => ServiceError::ConditionUnavailable(other),
            })?;
        self.predictor().predict_record(&record)
    }

    pub fn health(&self) -> HealthResponse {
        let (weather_freshness, traffic_freshness) = self.provider.freshness();
        HealthResponse {
            status: "ok".into(),
            model_version: self.predictor().model_version.clone(),
            weather_freshness,
            traffic_freshness,
        }
    }
}

fn now() -> Timestamp {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as Timestamp)
        .unwrap_or(0)
}

async fn predict(
    State(state): State<Arc<AppState>>,
    body: Result<Json<PredictionRequest>, JsonRejection>,
) -> Result<Json<PredictionResponse>, ServiceError> {
    let Json(request) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let response = state.handle_predict(&request);
    if let Err(e) = &response {
        tracing::debug!(error = %e, "prediction rejected");
    }
    response.map(Json)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<HealthResponse> {
    Json(state.health())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/health", get(health))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
