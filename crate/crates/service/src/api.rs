use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use matx_core::evaluation::{run_benchmark, BenchmarkOptions, DatasetManifest, MetricRegion};
use matx_core::generation::GenerationParams;
use matx_core::generation::TRANSFER_STAGES;
use matx_core::perception::{segment_regions, RegionPrompt};
use matx_core::session::{random_seed, EditStep, ExemplarHints, HistoryEntry, SessionState};
use matx_core::store::{AssetKind, AssetRecord};
use matx_core::{Error, Stage};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::jobs::{Job, JobError, JobKind};
use crate::state::AppState;

/// Largest accepted upload.
pub const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/assets", post(upload_asset))
        .route("/assets/{id}", get(get_asset))
        .route("/assets/{id}/record", get(get_asset_record))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/segment", post(request_segmentation))
        .route("/sessions/{id}/steps", post(submit_step))
        .route("/sessions/{id}/steps/{index}/reroll", post(reroll_step))
        .route("/sessions/{id}/apply", post(submit_plan))
        .route("/sessions/{id}/reorder", post(reorder))
        .route("/sessions/{id}/rollback", post(rollback))
        .route("/jobs/{id}", get(get_job))
        .route("/benchmarks", post(submit_benchmark))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

#[derive(Deserialize)]
struct UploadQuery {
    kind: Option<String>,
}

async fn upload_asset(
    State(state): State<AppState>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<AssetRecord>)> {
    let kind: AssetKind = q.kind.as_deref().unwrap_or("image").parse()?;
    let record = state.blocking(move |s| s.store().put(&body, kind)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn get_asset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = state.blocking(move |s| s.store().get(&id)).await?;
    Ok(([(header::CONTENT_TYPE, matx_core::store::PNG_MEDIA_TYPE)], bytes).into_response())
}

async fn get_asset_record(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AssetRecord>> {
    Ok(Json(state.blocking(move |s| s.store().record(&id)).await?))
}

/// Read-only snapshot of a session.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub base_image: String,
    pub current_image: String,
    pub done_steps: usize,
    pub steps: Vec<EditStep>,
    pub history: Vec<HistoryEntry>,
    pub masks: Vec<String>,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

impl From<SessionState> for SessionView {
    fn from(s: SessionState) -> Self {
        SessionView {
            current_image: s.current_image().to_string(),
            done_steps: s.done_count(),
            id: s.id,
            base_image: s.plan.base_image,
            steps: s.plan.steps,
            history: s.history,
            masks: s.masks,
            created: s.created,
            updated: s.updated,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    base_image: String,
}

fn require_kind(record: &AssetRecord, allowed: &[AssetKind], role: &str) -> matx_core::Result<()> {
    if allowed.contains(&record.kind) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{role} asset {} is a {}",
            record.id, record.kind
        )))
    }
}

/// Record of an asset a request refers to; absence is a validation error.
fn referenced(store: &matx_core::store::AssetStore, id: &str, role: &str) -> matx_core::Result<AssetRecord> {
    store.record(id).map_err(|e| match e {
        Error::AssetNotFound(_) => Error::invalid(format!("{role} asset {id} does not exist")),
        other => other,
    })
}

const IMAGE_KINDS: [AssetKind; 3] = [AssetKind::Image, AssetKind::Exemplar, AssetKind::Result];

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let session = state
        .blocking(move |s| {
            let rec = referenced(s.store(), &req.base_image, "base image")?;
            require_kind(&rec, &IMAGE_KINDS, "base image")?;
            let session = SessionState::new(rec.id);
            s.sessions().save(&session)?;
            Ok(session)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(session.into())))
}

async fn load_session(state: &AppState, id: String) -> ApiResult<SessionState> {
    state.blocking(move |s| s.sessions().load(&id)).await.map_err(|e| {
        if e.status == StatusCode::BAD_REQUEST {
            ApiError::not_found(e.message)
        } else {
            e
        }
    })
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(load_session(&state, id).await?.into()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRequest {
    prompts: Vec<RegionPrompt>,
}

async fn request_segmentation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SegmentRequest>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let session = load_session(&state, id.clone()).await?;
    if req.prompts.is_empty() {
        return Err(ApiError::bad_request("segmentation needs at least one prompt"));
    }
    let image_id = session.current_image().to_string();
    let image = state.blocking(move |s| s.store().load_raster(&image_id)).await?;
    for p in &req.prompts {
        p.validate(image.width(), image.height())?;
    }
    let prompts = req.prompts;
    let session_id = id.clone();
    let job = state.spawn_job(JobKind::Segment, Some(id), move |s, _progress| {
        let masks = segment_regions(
            s.pipeline().registry(),
            &s.pipeline().stack().segmenter,
            &image,
            &prompts,
        )
        .map_err(|e| JobError::from(&e.at(Stage::Segment)))?;
        let run = || -> matx_core::Result<Vec<String>> {
            let ids = masks
                .iter()
                .map(|m| s.store().put_mask(m).map(|r| r.id))
                .collect::<matx_core::Result<Vec<_>>>()?;
            let mut session = s.sessions().load(&session_id)?;
            session.masks.extend(ids.iter().cloned());
            s.sessions().save(&session)?;
            Ok(ids)
        };
        let ids = run().map_err(|e| JobError::from(&e))?;
        Ok(json!({ "masks": ids }))
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    region: String,
    exemplar: String,
    #[serde(default)]
    hints: ExemplarHints,
    /// GenerationParams fields; a missing seed is assigned by the server.
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
    #[serde(default = "yes")]
    run: bool,
}

#[derive(Serialize, Deserialize)]
pub struct StepAccepted {
    pub step_index: usize,
    pub step_id: String,
    /// Decimal string.
    pub seed: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub job: Option<Job>,
}

async fn submit_step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(mut req): Json<StepRequest>,
) -> ApiResult<(StatusCode, Json<StepAccepted>)> {
    if !req.params.contains_key("seed") {
        req.params.insert("seed".into(), json!(random_seed().to_string()));
    }
    let params: GenerationParams = serde_json::from_value(serde_json::Value::Object(std::mem::take(&mut req.params)))
        .map_err(|e| ApiError::bad_request(format!("params: {e}")))?;
    params.validate()?;

    let guard = state.lock_session(&id).await;
    let (session, index) = {
        let id = id.clone();
        let region = req.region.clone();
        let exemplar = req.exemplar.clone();
        let hints = req.hints.clone();
        let params = params.clone();
        state
            .blocking(move |s| {
                let mut session = s.sessions().load(&id)?;
                require_kind(&referenced(s.store(), &region, "region")?, &[AssetKind::Mask], "region")?;
                require_kind(&referenced(s.store(), &exemplar, "exemplar")?, &IMAGE_KINDS, "exemplar")?;
                let index = session.add_step(region, exemplar, hints, params)?;
                s.sessions().save(&session)?;
                Ok((session, index))
            })
            .await?
    };
    drop(guard);

    let step = &session.steps()[index];
    let mut accepted = StepAccepted {
        step_index: index,
        step_id: step.id.clone(),
        seed: params.seed.to_string(),
        job: None,
    };
    if !req.run {
        return Ok((StatusCode::CREATED, Json(accepted)));
    }
    accepted.job = Some(spawn_apply(&state, id, Some(index), JobKind::Transfer));
    Ok((StatusCode::ACCEPTED, Json(accepted)))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ApplyRequest {
    #[serde(default)]
    up_to: Option<usize>,
}

async fn submit_plan(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<ApplyRequest>>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let session = load_session(&state, id.clone()).await?;
    if let Some(k) = req.up_to {
        if k >= session.steps().len() {
            return Err(ApiError::bad_request(format!(
                "step {k} out of range for {} steps",
                session.steps().len()
            )));
        }
    }
    Ok((
        StatusCode::ACCEPTED,
        Json(spawn_apply(&state, id, req.up_to, JobKind::ApplyPlan)),
    ))
}

fn spawn_apply(state: &AppState, id: String, up_to: Option<usize>, kind: JobKind) -> Job {
    let session_id = id.clone();
    state.spawn_job(kind, Some(id), move |s, progress| {
        let err = |e: Error| JobError::from(&e);
        let mut session = s.sessions().load(&session_id).map_err(err)?;
        let start = session.done_count();
        let last = up_to.unwrap_or(session.steps().len().saturating_sub(1));
        let total = (last + 1).saturating_sub(start).max(1) as f64;
        let mut on_stage = |step: usize, stage: Stage| {
            let pos = TRANSFER_STAGES.iter().position(|s| *s == stage).unwrap_or(0) + 1;
            let done = (step - start) as f64 + pos as f64 / TRANSFER_STAGES.len() as f64;
            progress(done / total * 0.99);
        };
        let outcome = session
            .apply_plan_observed(s.pipeline(), s.store(), up_to, &mut on_stage)
            .map_err(err)?;
        s.sessions().save(&session).map_err(err)?;
        if let Some(f) = outcome.failed {
            return Err(JobError {
                kind: f.kind,
                stage: f.stage,
                step: Some(f.step),
                message: f.message,
            });
        }
        let results: Vec<_> = outcome
            .executed
            .iter()
            .map(|&i| json!({"step": i, "result": session.steps()[i].result}))
            .collect();
        Ok(json!({
            "executed": results,
            "result": up_to.and_then(|k| session.steps()[k].result.clone()),
            "current_image": session.current_image(),
        }))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReorderRequest {
    permutation: Vec<usize>,
}

async fn mutate_session<F>(state: &AppState, id: String, f: F) -> ApiResult<Json<SessionView>>
where
    F: FnOnce(&mut SessionState) -> matx_core::Result<()> + Send + 'static,
{
    let guard = state.lock_session(&id).await;
    let out = load_session(state, id).await;
    let mut session = out?;
    let saved = state
        .blocking(move |s| {
            f(&mut session)?;
            s.sessions().save(&session)?;
            Ok(session)
        })
        .await?;
    drop(guard);
    Ok(Json(saved.into()))
}

async fn reorder(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ReorderRequest>,
) -> ApiResult<Json<SessionView>> {
    mutate_session(&state, id, move |s| s.reorder_steps(&req.permutation)).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RollbackRequest {
    to: usize,
}

async fn rollback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<RollbackRequest>,
) -> ApiResult<Json<SessionView>> {
    mutate_session(&state, id, move |s| s.rollback(req.to)).await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RerollRequest {
    #[serde(default, with = "matx_core::generation::seed_string::option")]
    seed: Option<u64>,
}

async fn reroll_step(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, usize)>,
    body: Option<Json<RerollRequest>>,
) -> ApiResult<Json<SessionView>> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    mutate_session(&state, id, move |s| s.reroll_seed(index, req.seed).map(|_| ())).await
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    state
        .jobs()
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("job {id}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkRequest {
    /// Manifest path; relative paths resolve against the storage root.
    manifest: PathBuf,
    #[serde(default)]
    params: Option<GenerationParams>,
    #[serde(default)]
    region: MetricRegion,
    #[serde(default)]
    jobs: usize,
}

async fn submit_benchmark(
    State(state): State<AppState>,
    Json(req): Json<BenchmarkRequest>,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let params = req.params.unwrap_or_default();
    params.validate()?;
    let path = req.manifest;
    let manifest = state
        .blocking(move |s| {
            let root = s.store().root().parent().map(|p| p.to_path_buf()).unwrap_or_default();
            DatasetManifest::load(&if path.is_absolute() { path } else { root.join(path) })
        })
        .await?;
    let options = BenchmarkOptions {
        region: req.region,
        jobs: req.jobs,
        ..Default::default()
    };
    let job = state.spawn_job(JobKind::Benchmark, None, move |s, _progress| {
        let report = run_benchmark(s.pipeline(), &manifest, &params, &options).map_err(|e| JobError::from(&e))?;
        serde_json::to_value(&report).map_err(|e| JobError::from(&Error::from(e)))
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}
