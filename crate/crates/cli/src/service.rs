//! HTTP front end for the brush tool. Handlers validate requests and hand
//! the work to the same operations the command line runs.
//!
//! | route              | purpose                                        |
//! |--------------------|------------------------------------------------|
//! | `POST /mesh`       | store OBJ text, returns its hash               |
//! | `GET /mesh/{hash}` | OBJ text and face adjacency                    |
//! | `POST /region`     | strokes or target faces to a connected region  |
//! | `POST /repair`     | enqueue a single-region edit                   |
//! | `GET /job/{id}`    | job status, patch OBJ and metrics              |
//! | `GET /gate/{id}`   | gate values at query points                    |

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{error, info};
use meshfim_core::gate::{GateParams, DEFAULT_LATENT_DIM};
use meshfim_core::generators::GeneratorSpec;
use meshfim_core::mesh::{connected_components, edge_incidence, parse_obj, write_obj, FaceAdjacencyGraph, Mesh};
use meshfim_core::region::{RegionError, RegionSpec};
use meshfim_core::{FaceSet, SCHEMA_VERSION};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::CliError;
use crate::ops::{self, EditStatus, GateVisOptions};
use crate::store::{JobRecord, JobRequest, JobStatus, JobStore, MeshStore};

pub struct AppState {
    pub meshes: MeshStore,
    pub jobs: JobStore,
    slots: Arc<Semaphore>,
}

impl AppState {
    pub fn open(workspace: &Path, max_jobs: usize) -> Result<AppState, CliError> {
        Ok(AppState {
            meshes: MeshStore::open(workspace)?,
            jobs: JobStore::open(workspace)?,
            slots: Arc::new(Semaphore::new(max_jobs.max(1))),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/mesh", post(upload_mesh))
        .route("/mesh/{hash}", get(get_mesh))
        .route("/region", post(make_region))
        .route("/repair", post(submit_repair))
        .route("/job/{id}", get(get_job))
        .route("/gate/{id}", get(get_gate))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, workspace: &Path, max_jobs: usize) -> Result<(), CliError> {
    let state = Arc::new(AppState::open(workspace, max_jobs)?);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Service(format!("{addr}: {e}")))?;
    info!("listening on {addr}, workspace {}", workspace.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Service(e.to_string()))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError { status, body: json!({ "v": SCHEMA_VERSION, "error": message.into() }) }
    }

    fn not_found(what: &str, key: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, format!("unknown {what} {key}"))
    }

    fn internal(e: impl std::fmt::Display) -> ApiError {
        error!("{e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<RegionError> for ApiError {
    fn from(e: RegionError) -> ApiError {
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
        if let RegionError::Disconnected { components } = e {
            err.body["components"] = json!(components);
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn load_mesh(state: &AppState, hash: &str) -> Result<Mesh, ApiError> {
    state.meshes.get(hash).map_err(ApiError::internal)?.ok_or_else(|| ApiError::not_found("mesh", hash))
}

async fn upload_mesh(State(state): State<Arc<AppState>>, body: String) -> ApiResult {
    let mesh = parse_obj(&body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let hash = state.meshes.put(&mesh).map_err(ApiError::internal)?;
    let doc = json!({ "v": SCHEMA_VERSION, "hash": hash, "vertices": mesh.vertices.len(), "faces": mesh.faces.len() });
    Ok((StatusCode::CREATED, Json(doc)).into_response())
}

async fn get_mesh(State(state): State<Arc<AppState>>, UrlPath(hash): UrlPath<String>) -> ApiResult {
    let mesh = load_mesh(&state, &hash)?;
    let graph = FaceAdjacencyGraph::build(&mesh);
    let all: FaceSet = (0..mesh.faces.len()).collect();
    let incidence = edge_incidence(&mesh);
    let neighbors: Vec<&[usize]> = (0..mesh.faces.len()).map(|f| graph.neighbors(f)).collect();
    Ok(Json(json!({
        "v": SCHEMA_VERSION,
        "hash": hash,
        "obj": write_obj(&mesh),
        "vertices": mesh.vertices.len(),
        "faces": mesh.faces.len(),
        "adjacency": {
            "neighbors": neighbors,
            "components": connected_components(&graph, &all).len(),
            "open_edges": incidence.values().filter(|&&n| n == 1).count(),
            "non_manifold_edges": incidence.values().filter(|&&n| n > 2).count(),
        },
    }))
    .into_response())
}

fn default_width() -> usize {
    3
}

#[derive(Debug, Deserialize)]
pub struct RegionRequest {
    pub mesh: String,
    /// Brush strokes in the order they were drawn.
    #[serde(default)]
    pub strokes: Option<Vec<Vec<usize>>>,
    /// A manual target that must already be connected.
    #[serde(default)]
    pub target_faces: Option<Vec<usize>>,
    #[serde(default = "default_width")]
    pub context_width: usize,
}

async fn make_region(State(state): State<Arc<AppState>>, Json(req): Json<RegionRequest>) -> ApiResult {
    let mesh = load_mesh(&state, &req.mesh)?;
    let doc = match (req.strokes, req.target_faces) {
        (Some(strokes), None) => {
            let sel = ops::select_strokes(&mesh, &strokes, req.context_width)?;
            ops::region_document(&sel.region, &sel.excluded, &sel.warnings)
        }
        (None, Some(faces)) => {
            if faces.is_empty() {
                return Err(RegionError::Invalid("no faces selected".into()).into());
            }
            let graph = FaceAdjacencyGraph::build(&mesh);
            let target: FaceSet = faces.into_iter().collect();
            let region = meshfim_core::region::extract_context(&mesh, &graph, &target, req.context_width)?;
            ops::region_document(&region, &[], &[])
        }
        _ => {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "give exactly one of strokes or target_faces"))
        }
    };
    Ok(Json(doc).into_response())
}

fn default_generator() -> String {
    "oracle".into()
}

#[derive(Debug, Deserialize)]
pub struct RepairRequest {
    pub mesh: String,
    pub region: Value,
    #[serde(default = "default_generator")]
    pub generator: String,
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

async fn submit_repair(State(state): State<Arc<AppState>>, Json(req): Json<RepairRequest>) -> ApiResult {
    let mesh = load_mesh(&state, &req.mesh)?;
    if let Some(r) = &req.reference {
        load_mesh(&state, r)?;
    }
    req.generator
        .parse::<GeneratorSpec>()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    RegionSpec::from_json(&req.region.to_string(), &mesh, &FaceAdjacencyGraph::build(&mesh))?;
    let request = JobRequest {
        mesh: req.mesh,
        region: req.region,
        generator: req.generator,
        reference: req.reference,
        seed: req.seed,
    };
    let job = state.jobs.create(request).map_err(ApiError::internal)?;
    tokio::spawn(run_job(state.clone(), job.id.clone()));
    let doc = json!({ "v": SCHEMA_VERSION, "job": job.id, "status": job.status });
    Ok((StatusCode::ACCEPTED, Json(doc)).into_response())
}

async fn run_job(state: Arc<AppState>, id: String) {
    let Ok(_permit) = state.slots.clone().acquire_owned().await else { return };
    let record = match state.jobs.transition(&id, JobStatus::Running, |_| {}) {
        Ok(r) => r,
        Err(e) => return error!("{e}"),
    };
    let worker = state.clone();
    let outcome = tokio::task::spawn_blocking(move || execute(&worker, &record)).await;
    let result = match outcome {
        Ok(Ok(done)) => state.jobs.transition(&id, done.status, |r| {
            r.artifacts = done.artifacts;
            r.merged_mesh = done.merged_mesh;
        }),
        Ok(Err(e)) => state.jobs.transition(&id, JobStatus::Failed, |r| r.error = Some(e.to_string())),
        Err(e) => state.jobs.transition(&id, JobStatus::Failed, |r| r.error = Some(format!("job panicked: {e}"))),
    };
    match result {
        Ok(r) => info!("job {id} {:?}", r.status),
        Err(e) => error!("{e}"),
    }
}

struct Finished {
    status: JobStatus,
    artifacts: std::collections::BTreeMap<String, String>,
    merged_mesh: Option<String>,
}

/// The work behind one job: the edit `repair --region` performs plus the
/// dump `gate-vis --region` writes, both stored in the job directory.
fn execute(state: &AppState, job: &JobRecord) -> Result<Finished, CliError> {
    let req = &job.request;
    let missing = |h: &str| CliError::Service(format!("mesh {h} vanished from the store"));
    let mesh = state.meshes.get(&req.mesh)?.ok_or_else(|| missing(&req.mesh))?;
    let reference = match &req.reference {
        Some(h) => Some(state.meshes.get(h)?.ok_or_else(|| missing(h))?),
        None => None,
    };
    let region = RegionSpec::from_json(&req.region.to_string(), &mesh, &FaceAdjacencyGraph::build(&mesh))?;
    let spec: GeneratorSpec = req.generator.parse()?;
    let dir = state.jobs.job_dir(&job.id);
    let mut artifacts = std::collections::BTreeMap::new();

    let result = ops::edit(&mesh, &region, &spec, reference.as_ref(), req.seed)?;
    ops::write_text(&dir.join("patch.obj"), &write_obj(&result.patch))?;
    artifacts.insert("patch".to_string(), "patch.obj".to_string());
    ops::write_json(&dir.join("report.json"), &result.report)?;
    artifacts.insert("report".to_string(), "report.json".to_string());
    let merged_mesh = match &result.merged {
        Some(m) => {
            ops::write_text(&dir.join("merged.obj"), &write_obj(m))?;
            artifacts.insert("merged".to_string(), "merged.obj".to_string());
            Some(state.meshes.put(m)?)
        }
        None => None,
    };

    let params = GateParams::init(DEFAULT_LATENT_DIM, req.seed);
    let opts = GateVisOptions { seed: req.seed, ..Default::default() };
    let dump = ops::gate_visual(reference.as_ref().unwrap_or(&mesh), &mesh, Some(&region.target), &params, &opts)?;
    ops::write_json(&dir.join("gate.json"), &dump)?;
    artifacts.insert("gate".to_string(), "gate.json".to_string());

    let status = match result.report.status {
        EditStatus::Accepted => JobStatus::Done,
        EditStatus::Rejected | EditStatus::Unusable => JobStatus::Rejected,
    };
    Ok(Finished { status, artifacts, merged_mesh })
}

fn read_artifact(state: &AppState, job: &JobRecord, name: &str) -> Result<Option<String>, ApiError> {
    let Some(file) = job.artifacts.get(name) else { return Ok(None) };
    std::fs::read_to_string(state.jobs.job_dir(&job.id).join(file)).map(Some).map_err(ApiError::internal)
}

async fn get_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let job = state.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let mut doc = serde_json::to_value(&job).map_err(ApiError::internal)?;
    let report: Option<Value> = read_artifact(&state, &job, "report")?
        .map(|text| serde_json::from_str(&text))
        .transpose()
        .map_err(ApiError::internal)?;
    doc["patch_obj"] = json!(read_artifact(&state, &job, "patch")?);
    doc["metrics"] = report.as_ref().map_or(Value::Null, |r| r["metrics"].clone());
    doc["report"] = report.unwrap_or(Value::Null);
    Ok(Json(doc).into_response())
}

async fn get_gate(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let job = state.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let Some(text) = read_artifact(&state, &job, "gate")? else {
        let msg = match job.status {
            JobStatus::Queued | JobStatus::Running => format!("job {id} is still {:?}", job.status).to_lowercase(),
            _ => format!("job {id} has no gate data"),
        };
        return Err(ApiError::new(StatusCode::CONFLICT, msg));
    };
    let dump: Value = serde_json::from_str(&text).map_err(ApiError::internal)?;
    Ok(Json(dump).into_response())
}
