use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{FromRef, FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::Engine;
use chrono::{DateTime, Utc};
use depgate_core::gate::GateDecision;
use depgate_core::manifest::{build_sbom, ManifestFile, ManifestKind, SbomOptions, SbomSnapshot};
use depgate_core::model::{Coordinate, Status};
use depgate_core::pipeline::gate_sbom;
use depgate_core::reports;
use depgate_core::store::{
    ApplicationRow, CategoryRow, DependencyRow, DependencyVersionRow, DependencyVersionView, Event, NewWaiver,
    QueryFilter, StatusChange, Store, WaiverRow,
};
use depgate_core::sync::{load_feed_directory, run_sync, AliasMap, SyncError, SyncInputs, SyncReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::{ApiError, AppState};

pub fn router(state: AppState) -> Router {
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/v1/gate", post(gate))
        .route("/v1/sbom/{application}", get(sbom))
        .route("/v1/applications", get(applications))
        .route("/v1/dependencies", get(dependencies))
        .route("/v1/dependencies/{id}/versions/{version}/status", post(set_status))
        .route("/v1/dependencies/{id}/versions/{version}/blacklist", post(blacklist))
        .route("/v1/dependencies/{id}/category", put(assign_category))
        .route("/v1/waivers", get(list_waivers).post(grant_waiver))
        .route("/v1/categories", get(list_categories).post(create_category))
        .route("/v1/reports/categories", get(report_categories))
        .route("/v1/reports/vulnerabilities", get(report_vulnerabilities))
        .route("/v1/reports/stats", get(report_stats))
        .route("/v1/reports/duplication", get(report_duplication))
        .route("/v1/sync/run", post(sync_run))
        .route("/v1/events", get(events));
    if let Some(dir) = &state.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.with_state(state)
}

/// Present on every mutating handler. Passes when no token is configured.
pub struct Authorized;

impl<S> FromRequestParts<S> for Authorized
where
    AppState: FromRef<S>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        let state = AppState::from_ref(state);
        let Some(expected) = state.api_token.as_deref() else {
            return Ok(Authorized);
        };
        let presented = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        match presented {
            Some(t) if constant_time_eq(t.as_bytes(), expected.as_bytes()) => Ok(Authorized),
            _ => Err(ApiError::unauthorized()),
        }
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Body parsing that reports every shape problem as 400 with our error body.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

// ----------------------------------------------------------------------
// gate
// ----------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPayload {
    pub path: String,
    pub kind: ManifestKind,
    pub content_base64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateRequest {
    pub application: String,
    pub commit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifests: Option<Vec<ManifestPayload>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbom: Option<SbomSnapshot>,
}

/// The SBOM a gate request stands for, captured at `now` when built from
/// manifests.
fn request_sbom(req: GateRequest, prefixes: &[String], now: DateTime<Utc>) -> Result<SbomSnapshot, ApiError> {
    if req.application.trim().is_empty() {
        return Err(ApiError::bad_request("application is required"));
    }
    match (req.manifests, req.sbom) {
        (Some(_), Some(_)) => Err(ApiError::bad_request("send either manifests or sbom, not both")),
        (None, None) => Err(ApiError::bad_request("one of manifests or sbom is required")),
        (None, Some(sbom)) => {
            if sbom.application != req.application || sbom.commit != req.commit {
                return Err(ApiError::bad_request("sbom application/commit differ from the request"));
            }
            for c in sbom.coordinates() {
                c.validate().map_err(|e| ApiError::bad_request(format!("sbom: {e}")))?;
            }
            // re-normalize ordering and duplicates
            Ok(SbomSnapshot::new(sbom.application, sbom.commit, sbom.captured_at, sbom.dependencies))
        }
        (Some(payloads), None) => {
            let engine = base64::engine::general_purpose::STANDARD;
            let mut files = Vec::with_capacity(payloads.len());
            for p in payloads {
                let content = engine
                    .decode(p.content_base64.as_bytes())
                    .map_err(|e| ApiError::bad_request(format!("{}: invalid base64: {e}", p.path)))?;
                files.push(ManifestFile::new(p.path, p.kind, content));
            }
            let options = SbomOptions::with_internal_prefixes(prefixes.iter().cloned());
            let build = build_sbom(&req.application, &req.commit, &files, &options, now)
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            if build.all_malformed() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "all_manifests_malformed",
                    format!("no manifest could be parsed: {}", build.malformed.join(", ")),
                ));
            }
            for w in &build.warnings {
                tracing::debug!(path = ?w.path, "{}", w.message);
            }
            Ok(build.snapshot)
        }
    }
}

async fn gate(State(state): State<AppState>, _auth: Authorized, body: Bytes) -> Result<Json<GateDecision>, ApiError> {
    let req: GateRequest = parse_body(&body)?;
    let now = state.clock.now();
    let sbom = request_sbom(req, &state.internal_prefixes, now)?;
    let policy = state.policy.clone();
    let decision = state
        .blocking(move |store| gate_sbom(store, &sbom, &policy, now).map_err(ApiError::from))
        .await?;
    Ok(Json(decision))
}

// ----------------------------------------------------------------------
// reads
// ----------------------------------------------------------------------

async fn sbom(State(state): State<AppState>, Path(application): Path<String>) -> Result<Json<SbomSnapshot>, ApiError> {
    let found = state
        .blocking(move |store| store.latest_sbom(&application).map_err(ApiError::from))
        .await?;
    found
        .map(Json)
        .ok_or_else(|| ApiError::not_found("no SBOM recorded for that application"))
}

async fn applications(State(state): State<AppState>) -> Result<Json<Vec<ApplicationRow>>, ApiError> {
    Ok(Json(state.blocking(|s| s.applications().map_err(ApiError::from)).await?))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ApiError> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(ApiError::invalid_filter(format!("{key} must be true or false, got `{v}`"))),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ApiError> {
    v.parse()
        .map_err(|_| ApiError::invalid_filter(format!("{key} must be a non-negative integer, got `{v}`")))
}

const KNOWN_FILTERS: &[&str] = &["status", "category", "application", "has_vulns", "limit", "offset"];

/// Query string of `/v1/dependencies`.
pub fn parse_dependency_query(q: &HashMap<String, String>) -> Result<(QueryFilter, usize, Option<usize>), ApiError> {
    if let Some(k) = q.keys().find(|k| !KNOWN_FILTERS.contains(&k.as_str())) {
        return Err(ApiError::invalid_filter(format!("unknown filter `{k}`")));
    }
    let nonempty = |k: &str| q.get(k).map(String::as_str).filter(|v| !v.is_empty());
    let filter = QueryFilter {
        status: nonempty("status")
            .map(|v| v.parse::<Status>().map_err(|e| ApiError::invalid_filter(e.to_string())))
            .transpose()?,
        category: nonempty("category").map(str::to_string),
        application: nonempty("application").map(str::to_string),
        has_vulns: nonempty("has_vulns").map(|v| parse_bool("has_vulns", v)).transpose()?,
    };
    let offset = nonempty("offset").map(|v| parse_usize("offset", v)).transpose()?.unwrap_or(0);
    let limit = nonempty("limit").map(|v| parse_usize("limit", v)).transpose()?;
    Ok((filter, offset, limit))
}

async fn dependencies(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Vec<DependencyVersionView>>, ApiError> {
    let (filter, offset, limit) = parse_dependency_query(&q)?;
    let rows = state.blocking(move |s| s.query(&filter).map_err(ApiError::from)).await?;
    let page = rows.into_iter().skip(offset).take(limit.unwrap_or(usize::MAX)).collect();
    Ok(Json(page))
}

async fn list_categories(State(state): State<AppState>) -> Result<Json<Vec<CategoryRow>>, ApiError> {
    Ok(Json(state.blocking(|s| s.categories().map_err(ApiError::from)).await?))
}

async fn list_waivers(State(state): State<AppState>) -> Result<Json<Vec<WaiverRow>>, ApiError> {
    Ok(Json(state.blocking(|s| s.waivers().map_err(ApiError::from)).await?))
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    #[serde(default)]
    since_seq: Option<String>,
}

async fn events(State(state): State<AppState>, Query(q): Query<SinceQuery>) -> Result<Json<Vec<Event>>, ApiError> {
    let since = match q.since_seq.as_deref() {
        None | Some("") => 0,
        Some(v) => v
            .parse::<i64>()
            .map_err(|_| ApiError::invalid_filter(format!("since_seq must be an integer, got `{v}`")))?,
    };
    Ok(Json(state.blocking(move |s| s.events_since(since).map_err(ApiError::from)).await?))
}

// ----------------------------------------------------------------------
// vetting
// ----------------------------------------------------------------------

fn version_row(store: &Store, dependency_id: i64, version: &str) -> Result<DependencyVersionRow, ApiError> {
    store.dependency(dependency_id)?;
    store
        .find_version(dependency_id, version)?
        .ok_or_else(|| ApiError::not_found(format!("dependency {dependency_id} has no version {version}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusRequest {
    pub status: Status,
    #[serde(default)]
    pub justification: Option<String>,
    #[serde(default)]
    pub end_date: Option<DateTime<Utc>>,
    pub actor: String,
}

async fn set_status(
    State(state): State<AppState>,
    _auth: Authorized,
    Path((id, version)): Path<(i64, String)>,
    body: Bytes,
) -> Result<Json<DependencyVersionRow>, ApiError> {
    let req: StatusRequest = parse_body(&body)?;
    let now = state.clock.now();
    let row = state
        .blocking(move |store| {
            let v = version_row(store, id, &version)?;
            let change = StatusChange {
                version_id: v.id,
                status: req.status,
                justification: req.justification,
                end_date: req.end_date,
                actor: req.actor,
            };
            Ok(store.set_status(&change, now)?)
        })
        .await?;
    Ok(Json(row))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlacklistRequest {
    pub reason: String,
    pub actor: String,
}

async fn blacklist(
    State(state): State<AppState>,
    _auth: Authorized,
    Path((id, version)): Path<(i64, String)>,
    body: Bytes,
) -> Result<Json<DependencyVersionRow>, ApiError> {
    let req: BlacklistRequest = parse_body(&body)?;
    let now = state.clock.now();
    let row = state
        .blocking(move |store| {
            let v = version_row(store, id, &version)?;
            Ok(store.blacklist(v.id, &req.reason, &req.actor, now)?)
        })
        .await?;
    Ok(Json(row))
}

/// Identifies the waived version either by id or by canonical coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaiverRequest {
    pub application: String,
    #[serde(default)]
    pub dependency_version_id: Option<i64>,
    #[serde(default)]
    pub coordinate: Option<String>,
    pub expires: DateTime<Utc>,
    pub justification: String,
    pub approver: String,
}

async fn grant_waiver(
    State(state): State<AppState>,
    _auth: Authorized,
    body: Bytes,
) -> Result<(StatusCode, Json<WaiverRow>), ApiError> {
    let req: WaiverRequest = parse_body(&body)?;
    let now = state.clock.now();
    let row = state
        .blocking(move |store| {
            let version_id = match (req.dependency_version_id, req.coordinate.as_deref()) {
                (Some(id), None) => id,
                (None, Some(c)) => {
                    let c = Coordinate::parse_canonical(c).map_err(|e| ApiError::bad_request(e.to_string()))?;
                    store
                        .find_coordinate(&c)?
                        .ok_or_else(|| ApiError::not_found(format!("{} is not in the inventory", c.canonical())))?
                        .id
                }
                _ => return Err(ApiError::bad_request("give exactly one of dependency_version_id or coordinate")),
            };
            let waiver = NewWaiver {
                application: req.application,
                dependency_version_id: version_id,
                expires: req.expires,
                justification: req.justification,
                approver: req.approver,
            };
            Ok(store.grant_waiver(&waiver, now)?)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(row)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRequest {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
}

async fn create_category(
    State(state): State<AppState>,
    _auth: Authorized,
    body: Bytes,
) -> Result<(StatusCode, Json<CategoryRow>), ApiError> {
    let req: CategoryRequest = parse_body(&body)?;
    let row = state
        .blocking(move |s| Ok(s.create_category(&req.name, req.description.as_deref())?))
        .await?;
    Ok((StatusCode::CREATED, Json(row)))
}

/// The category is named either by id or by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignCategoryRequest {
    #[serde(default)]
    pub category_id: Option<i64>,
    #[serde(default)]
    pub category: Option<String>,
    pub actor: String,
}

async fn assign_category(
    State(state): State<AppState>,
    _auth: Authorized,
    Path(id): Path<i64>,
    body: Bytes,
) -> Result<Json<DependencyRow>, ApiError> {
    let req: AssignCategoryRequest = parse_body(&body)?;
    let now = state.clock.now();
    let row = state
        .blocking(move |store| {
            let category_id = match (req.category_id, req.category.as_deref()) {
                (Some(cid), None) => cid,
                (None, Some(name)) => {
                    store
                        .category_by_name(name)?
                        .ok_or_else(|| ApiError::not_found(format!("no category named `{name}`")))?
                        .id
                }
                _ => return Err(ApiError::bad_request("give exactly one of category_id or category")),
            };
            Ok(store.assign_category(id, category_id, &req.actor, now)?)
        })
        .await?;
    Ok(Json(row))
}

// ----------------------------------------------------------------------
// reports
// ----------------------------------------------------------------------

async fn report_categories(
    State(state): State<AppState>,
) -> Result<Json<Vec<reports::CategoryBreakdownRow>>, ApiError> {
    Ok(Json(state.blocking(|s| Ok(reports::category_breakdown(s)?)).await?))
}

async fn report_vulnerabilities(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Vec<reports::LibraryVulnSummaryRow>>, ApiError> {
    let category = q
        .get("category")
        .filter(|c| !c.is_empty())
        .cloned()
        .ok_or_else(|| ApiError::invalid_filter("category is required"))?;
    Ok(Json(state.blocking(move |s| Ok(reports::vuln_summary(s, &category)?)).await?))
}

pub const DEFAULT_STATS_WINDOW: u32 = 30;
pub const DEFAULT_DUPLICATION_THRESHOLD: usize = 5;

async fn report_stats(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<reports::EcosystemStats>, ApiError> {
    let window = match q.get("window").filter(|v| !v.is_empty()) {
        Some(v) => v
            .parse::<u32>()
            .map_err(|_| ApiError::invalid_filter(format!("window must be a positive integer, got `{v}`")))?,
        None => DEFAULT_STATS_WINDOW,
    };
    let now = state.clock.now();
    Ok(Json(state.blocking(move |s| Ok(reports::ecosystem_stats(s, window, now)?)).await?))
}

async fn report_duplication(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Vec<reports::DuplicationCategory>>, ApiError> {
    let threshold = match q.get("threshold").filter(|v| !v.is_empty()) {
        Some(v) => parse_usize("threshold", v)?,
        None => DEFAULT_DUPLICATION_THRESHOLD,
    };
    Ok(Json(state.blocking(move |s| Ok(reports::duplication_report(s, threshold)?)).await?))
}

// ----------------------------------------------------------------------
// sync
// ----------------------------------------------------------------------

async fn sync_run(State(state): State<AppState>, _auth: Authorized) -> Result<Json<SyncReport>, ApiError> {
    let now = state.clock.now();
    let holder = state.next_sync_holder();
    let sources = state.sync.clone();
    let (report, seq_before) = state
        .blocking(move |store| {
            let (feeds, aliases) = match &sources.feeds_dir {
                Some(dir) => load_feed_directory(dir)
                    .map_err(|e| ApiError::internal(format!("feeds at {}: {e}", dir.display())))?,
                None => (Vec::new(), AliasMap::default()),
            };
            let adapters = sources.registries.adapters();
            let registries: Vec<&dyn depgate_core::sync::RegistryAdapter> =
                adapters.iter().map(|a| a.as_ref()).collect();
            let inputs = SyncInputs {
                registries: &registries,
                feeds: &feeds,
                aliases: &aliases,
            };
            let before = store.last_event_seq()?;
            match run_sync(store, &inputs, now, &holder) {
                Ok(r) => Ok((r, before)),
                Err(SyncError::Busy) => Err(SyncError::Busy.into()),
                Err(e) => Err(e.into()),
            }
        })
        .await?;

    if !state.dispatcher.is_empty() && report.events_emitted > 0 {
        let store = state.store.clone();
        let dispatcher = state.dispatcher.clone();
        let clock = state.clock.clone();
        tokio::task::spawn_blocking(move || {
            if let Err(e) = dispatcher.dispatch_since(&store, seq_before, || clock.now()) {
                tracing::error!("webhook dispatch: {e}");
            }
        });
    }
    Ok(Json(report))
}
