//! The `/v1` HTTP JSON API. Handlers are thin shells over the library: each
//! request takes one snapshot of (bundle, plant, tariff, table) and uses it
//! throughout, so a reload never shows a request two different bundles.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDateTime;
use cwloop_core::advisory::{self, AdviseRequest, LookupTable, Recommendation, Settings};
use cwloop_core::objective::{LoopObjective, LoopPower, Mode};
use cwloop_core::plant::PlantConfig;
use cwloop_core::pso::SwarmConfig;
use cwloop_core::surrogate::{Envelope, SurrogateBundle};
use cwloop_core::tariff::{SavingsReport, TariffSchedule, YearMonth};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{bundle, config, files, table};

/// Files the service loads at start and again on reload.
#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub bundle: PathBuf,
    pub plant: Option<PathBuf>,
    pub tariff: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub swarm: Option<PathBuf>,
    /// Directory that `/v1/savings` dataset names resolve in.
    pub data_dir: Option<PathBuf>,
    /// Bearer token for `/v1/admin/reload`; reload is disabled without one.
    pub admin_token: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub bundle: SurrogateBundle,
    pub plant: PlantConfig,
    pub tariff: Option<TariffSchedule>,
    pub table: Option<LookupTable>,
    pub swarm: SwarmConfig,
}

impl Snapshot {
    pub fn load(cfg: &ServiceConfig) -> crate::Result<Self> {
        let plant = match &cfg.plant {
            Some(p) => config::load_plant(p)?,
            None => PlantConfig::default(),
        };
        let swarm = match &cfg.swarm {
            Some(p) => config::load_swarm(p)?,
            None => SwarmConfig::default(),
        };
        Ok(Self {
            bundle: bundle::load_bundle(&cfg.bundle)?,
            plant,
            tariff: cfg.tariff.as_deref().map(config::load_tariff).transpose()?,
            table: cfg.table.as_deref().map(table::load_table_json).transpose()?,
            swarm,
        })
    }

    pub fn fingerprint(&self) -> &str {
        &self.bundle.training_data_fingerprint
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done { reports: Vec<SavingsReport> },
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct SavingsJob {
    pub id: u64,
    pub bundle_fingerprint: String,
    pub measured: String,
    pub months: Vec<YearMonth>,
    #[serde(flatten)]
    pub status: JobStatus,
}

struct Inner {
    snapshot: RwLock<Arc<Snapshot>>,
    config: Option<ServiceConfig>,
    data_dir: Option<PathBuf>,
    admin_token: Option<String>,
    jobs: Mutex<BTreeMap<u64, SavingsJob>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn from_config(cfg: ServiceConfig) -> crate::Result<Self> {
        let snap = Snapshot::load(&cfg)?;
        Ok(Self::build(snap, cfg.data_dir.clone(), cfg.admin_token.clone(), Some(cfg)))
    }

    /// A fixed snapshot with nothing to reload from.
    pub fn with_snapshot(snap: Snapshot, data_dir: Option<PathBuf>) -> Self {
        Self::build(snap, data_dir, None, None)
    }

    fn build(snap: Snapshot, data_dir: Option<PathBuf>, admin_token: Option<String>, config: Option<ServiceConfig>) -> Self {
        AppState(Arc::new(Inner {
            snapshot: RwLock::new(Arc::new(snap)),
            config,
            data_dir,
            admin_token,
            jobs: Mutex::new(BTreeMap::new()),
        }))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.0.snapshot.read().expect("snapshot lock").clone()
    }

    fn swap(&self, snap: Snapshot) -> Arc<Snapshot> {
        let mut guard = self.0.snapshot.write().expect("snapshot lock");
        std::mem::replace(&mut *guard, Arc::new(snap))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/table", get(get_table))
        .route("/v1/bundle/meta", get(bundle_meta))
        .route("/v1/advise", post(advise))
        .route("/v1/whatif", post(whatif))
        .route("/v1/savings", post(start_savings))
        .route("/v1/savings/{id}", get(savings_status))
        .route("/v1/admin/reload", post(reload))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl ToString) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.to_string(),
                field: None,
            },
        }
    }

    fn field(field: &str, error: impl ToString) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: error.to_string(),
                field: Some(field.into()),
            },
        }
    }
}

impl From<cwloop_core::Error> for ApiError {
    fn from(e: cwloop_core::Error) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parses a JSON body, naming the offending field on failure.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    let malformed = |e: serde_json::Error| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}"));
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            malformed(inner)
        } else {
            ApiError::field(&path, inner)
        }
    })?;
    de.end().map_err(malformed)?;
    Ok(value)
}

fn check_finite(field: &str, v: f64) -> Result<(), ApiError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ApiError::field(field, "must be a finite number"))
    }
}

fn check_conditions(snap: &Snapshot, q_load_tons: f64, t_wb_f: f64) -> Result<(), ApiError> {
    check_finite("q_load_tons", q_load_tons)?;
    check_finite("t_wb_f", t_wb_f)?;
    if q_load_tons <= 0.0 {
        return Err(ApiError::field("q_load_tons", "must be positive"));
    }
    let cap = snap.plant.total_capacity_tons();
    if q_load_tons > cap {
        return Err(ApiError::field("q_load_tons", format!("exceeds plant capacity {cap} tons")));
    }
    Ok(())
}

fn check_settings(snap: &Snapshot, prefix: &str, t_cws_f: f64, n_fans: u8) -> Result<(), ApiError> {
    check_finite(&format!("{prefix}t_cws_f"), t_cws_f)?;
    if !snap.bundle.tower_power_models.contains_key(&n_fans) {
        let stages: Vec<u8> = snap.bundle.tower_power_models.keys().copied().collect();
        return Err(ApiError::field(&format!("{prefix}n_fans"), format!("must be one of {stages:?}")));
    }
    Ok(())
}

fn now() -> NaiveDateTime {
    chrono::Local::now().naive_local()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub bundle_fingerprint: String,
}

async fn health(State(st): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        bundle_fingerprint: st.snapshot().fingerprint().into(),
    })
}

async fn get_table(State(st): State<AppState>) -> Result<Response, ApiError> {
    let snap = st.snapshot();
    let table = snap
        .table
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no look-up table loaded"))?;
    Ok(Json(table).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub name: String,
    pub features: Vec<String>,
    pub target: String,
    pub n_trees: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BundleMeta {
    pub schema_version: u32,
    pub created_at: NaiveDateTime,
    pub training_data_fingerprint: String,
    pub envelope: Envelope,
    pub fan_stages: Vec<u8>,
    pub models: Vec<ModelMeta>,
    pub tariff: Option<String>,
    pub table_loaded: bool,
}

async fn bundle_meta(State(st): State<AppState>) -> Json<BundleMeta> {
    let snap = st.snapshot();
    let b = &snap.bundle;
    Json(BundleMeta {
        schema_version: b.schema_version,
        created_at: b.created_at,
        training_data_fingerprint: b.training_data_fingerprint.clone(),
        envelope: b.envelope,
        fan_stages: b.tower_power_models.keys().copied().collect(),
        models: b
            .models()
            .into_iter()
            .map(|(name, m, _, _)| ModelMeta {
                name,
                features: m.feature_names.clone(),
                target: m.target_name.clone(),
                n_trees: m.trees.len(),
            })
            .collect(),
        tariff: snap.tariff.as_ref().map(|t| t.name.clone()),
        table_loaded: snap.table.is_some(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdviseBody {
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    #[serde(default)]
    pub current: Option<Settings>,
    /// Prices the recommendation when a tariff is loaded.
    #[serde(default)]
    pub timestamp: Option<NaiveDateTime>,
}

fn tariff_at<'a>(snap: &'a Snapshot, at: Option<NaiveDateTime>) -> Option<(&'a TariffSchedule, NaiveDateTime)> {
    Some((snap.tariff.as_ref()?, at?))
}

/// `advise` exactly as the library computes it.
pub fn advise_with(snap: &Snapshot, body: &AdviseBody, computed_at: NaiveDateTime) -> Result<Recommendation, ApiError> {
    check_conditions(snap, body.q_load_tons, body.t_wb_f)?;
    if let Some(c) = body.current {
        check_settings(snap, "current.", c.t_cws_f, c.n_fans)?;
    }
    let req = AdviseRequest {
        q_load_tons: body.q_load_tons,
        t_wb_f: body.t_wb_f,
        current: body.current,
        tariff: tariff_at(snap, body.timestamp),
    };
    Ok(advisory::advise(&snap.bundle, &snap.plant, &req, &snap.swarm, computed_at)?)
}

async fn advise(State(st): State<AppState>, body: Bytes) -> ApiResult<Recommendation> {
    let body: AdviseBody = parse_body(&body)?;
    let snap = st.snapshot();
    Ok(Json(advise_with(&snap, &body, now())?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfBody {
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    pub t_cws_f: f64,
    pub n_fans: u8,
    #[serde(default)]
    pub timestamp: Option<NaiveDateTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub q_load_tons: f64,
    pub t_wb_f: f64,
    pub t_cws_f: f64,
    pub n_fans: u8,
    pub predicted: LoopPower,
    pub predicted_power_kw: f64,
    /// False when the tower cannot reach `t_cws_f` with `n_fans`.
    pub feasible: bool,
    pub predicted_cost_rate_per_h: Option<f64>,
    pub optimum: Settings,
    pub optimum_power_kw: f64,
    /// What-if power minus the recommended power.
    pub gap_to_optimum_kw: f64,
    pub bundle_fingerprint: String,
    pub warnings: Vec<String>,
}

pub fn whatif_with(snap: &Snapshot, body: &WhatIfBody) -> Result<WhatIf, ApiError> {
    check_conditions(snap, body.q_load_tons, body.t_wb_f)?;
    check_settings(snap, "", body.t_cws_f, body.n_fans)?;
    let obj = LoopObjective::new(
        &snap.bundle,
        &snap.plant,
        body.q_load_tons,
        body.t_wb_f,
        Mode::Power,
        &snap.swarm.fan_strata,
    )?;
    let p = obj.power(body.t_cws_f, body.n_fans)?;
    let rec = advise_with(
        snap,
        &AdviseBody {
            q_load_tons: body.q_load_tons,
            t_wb_f: body.t_wb_f,
            current: None,
            timestamp: None,
        },
        body.timestamp.unwrap_or_default(),
    )?;
    let rate = match tariff_at(snap, body.timestamp) {
        Some((t, at)) => Some(t.energy_rate_at(at)?),
        None => None,
    };
    let total = p.total_kw();
    Ok(WhatIf {
        q_load_tons: body.q_load_tons,
        t_wb_f: body.t_wb_f,
        t_cws_f: body.t_cws_f,
        n_fans: body.n_fans,
        predicted: p,
        predicted_power_kw: total,
        feasible: body.t_cws_f >= p.t_cws_floor_f,
        predicted_cost_rate_per_h: rate.map(|r| r * total),
        optimum: Settings {
            t_cws_f: rec.t_cws_opt_f,
            n_fans: rec.n_fans_opt,
        },
        optimum_power_kw: rec.predicted_power_kw,
        gap_to_optimum_kw: total - rec.predicted_power_kw,
        bundle_fingerprint: snap.fingerprint().into(),
        warnings: rec.warnings,
    })
}

async fn whatif(State(st): State<AppState>, body: Bytes) -> ApiResult<WhatIf> {
    let body: WhatIfBody = parse_body(&body)?;
    let snap = st.snapshot();
    Ok(Json(whatif_with(&snap, &body)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavingsBody {
    /// Dataset CSV name inside the service's data directory.
    pub measured: String,
    pub months: Vec<YearMonth>,
}

fn resolve_data_file(dir: &Path, name: &str) -> Result<PathBuf, ApiError> {
    let rel = Path::new(name);
    let plain = !name.is_empty() && rel.components().all(|c| matches!(c, Component::Normal(_)));
    if !plain {
        return Err(ApiError::field("measured", "must be a plain file name inside the data directory"));
    }
    Ok(dir.join(rel))
}

async fn start_savings(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<SavingsJob>), ApiError> {
    let body: SavingsBody = parse_body(&body)?;
    let dir = st
        .0
        .data_dir
        .as_deref()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_IMPLEMENTED, "savings jobs need a data directory"))?;
    let path = resolve_data_file(dir, &body.measured)?;
    if body.months.is_empty() {
        return Err(ApiError::field("months", "at least one month is needed"));
    }
    let snap = st.snapshot();
    let tariff = snap
        .tariff
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no tariff loaded"))?;
    let job = {
        let mut jobs = st.0.jobs.lock().expect("jobs lock");
        let id = jobs.keys().next_back().map_or(1, |k| k + 1);
        let job = SavingsJob {
            id,
            bundle_fingerprint: snap.fingerprint().into(),
            measured: body.measured.clone(),
            months: body.months.clone(),
            status: JobStatus::Running,
        };
        jobs.insert(id, job.clone());
        job
    };
    let (id, months, state) = (job.id, body.months, st.clone());
    tokio::task::spawn_blocking(move || {
        let status = match run_savings(&snap, &tariff, &path, &months) {
            Ok(reports) => JobStatus::Done { reports },
            Err(error) => JobStatus::Failed { error },
        };
        if let Some(j) = state.0.jobs.lock().expect("jobs lock").get_mut(&id) {
            j.status = status;
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

fn run_savings(snap: &Snapshot, tariff: &TariffSchedule, path: &Path, months: &[YearMonth]) -> Result<Vec<SavingsReport>, String> {
    let data = files::read_dataset(path).map_err(|e| e.to_string())?;
    let out = advisory::savings_pipeline(&snap.bundle, &snap.plant, &data, tariff, months, &snap.swarm)
        .map_err(|e| e.to_string())?;
    Ok(out.reports)
}

async fn savings_status(State(st): State<AppState>, UrlPath(id): UrlPath<u64>) -> ApiResult<SavingsJob> {
    let jobs = st.0.jobs.lock().expect("jobs lock");
    jobs.get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no savings job {id}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Reloaded {
    pub previous_fingerprint: String,
    pub bundle_fingerprint: String,
}

async fn reload(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Reloaded> {
    let Some(token) = st.0.admin_token.as_deref() else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "reload is disabled: no admin token configured"));
    };
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented != Some(token) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token"));
    }
    let cfg = st
        .0
        .config
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "service has no files to reload from"))?;
    let snap = tokio::task::spawn_blocking(move || Snapshot::load(&cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let bundle_fingerprint = snap.fingerprint().to_string();
    let old = st.swap(snap);
    Ok(Json(Reloaded {
        previous_fingerprint: old.fingerprint().into(),
        bundle_fingerprint,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_errors_name_fields() {
        let e = parse_body::<AdviseBody>(br#"{"q_load_tons": 1000, "t_wb_f": "warm"}"#).unwrap_err();
        assert_eq!(e.body.field.as_deref(), Some("t_wb_f"));
        let e = parse_body::<AdviseBody>(br#"{"q_load_tons": 1000, "t_wb_f": 70, "current": {"t_cws_f": 75}}"#)
            .unwrap_err();
        assert_eq!(e.body.field.as_deref(), Some("current"), "{:?}", e.body);
        assert!(e.body.error.contains("n_fans"));
        let e = parse_body::<AdviseBody>(b"{\"q_load_tons\": ").unwrap_err();
        assert!(e.body.field.is_none() && e.body.error.starts_with("malformed JSON"));
        let e = parse_body::<AdviseBody>(br#"{"q_load_tons": 1, "t_wb_f": 2} x"#).unwrap_err();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
    }

    #[test]
    fn data_names_stay_inside_the_directory() {
        let d = Path::new("/data");
        assert_eq!(resolve_data_file(d, "june.csv").unwrap(), Path::new("/data/june.csv"));
        for bad in ["../etc/passwd", "/etc/passwd", "", "a/../../b"] {
            assert!(resolve_data_file(d, bad).is_err(), "{bad}");
        }
    }
}
