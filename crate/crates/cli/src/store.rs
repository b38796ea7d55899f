//! On-disk workspace: content-addressed meshes and job records.
//!
//! ```text
//! <root>/meshes/<sha256>.obj
//! <root>/jobs/<id>/job.json     plus the job's artifacts
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use meshfim_core::mesh::{parse_obj, write_obj, Mesh, MeshError};
use meshfim_core::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ops::mesh_hash;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("stored mesh {hash} is unreadable: {source}")]
    Mesh { hash: String, source: MeshError },
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("job {id} cannot go from {from:?} to {to:?}")]
    Transition { id: String, from: JobStatus, to: JobStatus },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Writes through a temporary file so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io(path))
}

fn is_hash(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

#[derive(Debug)]
pub struct MeshStore {
    dir: PathBuf,
}

impl MeshStore {
    pub fn open(root: &Path) -> Result<MeshStore, StoreError> {
        let dir = root.join("meshes");
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        Ok(MeshStore { dir })
    }

    pub fn put(&self, mesh: &Mesh) -> Result<String, StoreError> {
        let hash = mesh_hash(mesh);
        let path = self.dir.join(format!("{hash}.obj"));
        if !path.exists() {
            write_atomic(&path, write_obj(mesh).as_bytes())?;
        }
        Ok(hash)
    }

    /// `None` for hashes that are malformed or not stored.
    pub fn get(&self, hash: &str) -> Result<Option<Mesh>, StoreError> {
        if !is_hash(hash) {
            return Ok(None);
        }
        let path = self.dir.join(format!("{hash}.obj"));
        match std::fs::read_to_string(&path) {
            Ok(text) => parse_obj(&text).map(Some).map_err(|source| StoreError::Mesh { hash: hash.into(), source }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(&path)(e)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Rejected,
    Failed,
}

impl JobStatus {
    fn rank(self) -> u8 {
        match self {
            JobStatus::Queued => 0,
            JobStatus::Running => 1,
            JobStatus::Done | JobStatus::Rejected | JobStatus::Failed => 2,
        }
    }

    pub fn is_final(self) -> bool {
        self.rank() == 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub mesh: String,
    /// Region record as accepted by `RegionSpec::from_json`.
    pub region: serde_json::Value,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub v: u32,
    pub id: String,
    pub request: JobRequest,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Artifact name to file name inside the job directory.
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
    /// Hash of the repaired mesh in the mesh store, once accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_mesh: Option<String>,
}

#[derive(Debug)]
pub struct JobStore {
    dir: PathBuf,
    jobs: Mutex<HashMap<String, JobRecord>>,
}

impl JobStore {
    /// Loads every stored record. Jobs that were queued or running when the
    /// previous process stopped are marked failed.
    pub fn open(root: &Path) -> Result<JobStore, StoreError> {
        let dir = root.join("jobs");
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let store = JobStore { dir, jobs: Mutex::new(HashMap::new()) };
        let mut jobs = HashMap::new();
        for entry in std::fs::read_dir(&store.dir).map_err(io(&store.dir))? {
            let path = entry.map_err(io(&store.dir))?.path().join("job.json");
            let Ok(text) = std::fs::read_to_string(&path) else { continue };
            let mut record: JobRecord =
                serde_json::from_str(&text).map_err(|source| StoreError::Json { path: path.clone(), source })?;
            if !record.status.is_final() {
                record.status = JobStatus::Failed;
                record.error = Some("interrupted by a service restart".into());
                store.persist(&record)?;
            }
            jobs.insert(record.id.clone(), record);
        }
        *store.jobs.lock().expect("job table") = jobs;
        Ok(store)
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id)
    }

    fn persist(&self, record: &JobRecord) -> Result<(), StoreError> {
        let dir = self.job_dir(&record.id);
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let text = serde_json::to_vec_pretty(record).expect("records serialize");
        write_atomic(&dir.join("job.json"), &text)
    }

    pub fn create(&self, request: JobRequest) -> Result<JobRecord, StoreError> {
        let record = JobRecord {
            v: SCHEMA_VERSION,
            id: uuid::Uuid::new_v4().simple().to_string(),
            request,
            status: JobStatus::Queued,
            error: None,
            artifacts: BTreeMap::new(),
            merged_mesh: None,
        };
        self.persist(&record)?;
        self.jobs.lock().expect("job table").insert(record.id.clone(), record.clone());
        Ok(record)
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.jobs.lock().expect("job table").get(id).cloned()
    }

    /// Applies `update` and moves to `to`; only forward moves are allowed.
    pub fn transition(&self, id: &str, to: JobStatus, update: impl FnOnce(&mut JobRecord)) -> Result<JobRecord, StoreError> {
        let mut jobs = self.jobs.lock().expect("job table");
        let record = jobs.get_mut(id).ok_or_else(|| StoreError::UnknownJob(id.into()))?;
        if to.rank() <= record.status.rank() {
            return Err(StoreError::Transition { id: id.into(), from: record.status, to });
        }
        let mut next = record.clone();
        update(&mut next);
        next.status = to;
        self.persist(&next)?;
        *record = next.clone();
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use meshfim_core::synth;

    fn request() -> JobRequest {
        JobRequest {
            mesh: "0".repeat(64),
            region: serde_json::json!({"v": 1, "target_faces": [0], "context_width": 1, "mode": "manual"}),
            generator: "oracle".into(),
            reference: None,
            seed: 3,
        }
    }

    #[test]
    fn meshes_are_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let store = MeshStore::open(dir.path()).unwrap();
        let cube = synth::cube(1.0);
        let h = store.put(&cube).unwrap();
        assert_eq!(h, store.put(&cube.clone()).unwrap());
        assert_eq!(store.get(&h).unwrap().unwrap(), parse_obj(&write_obj(&cube)).unwrap());
        assert!(store.get(&"f".repeat(64)).unwrap().is_none());
        assert!(store.get("../../etc/passwd").unwrap().is_none());
    }

    #[test]
    fn status_only_moves_forward() {
        let dir = tempfile::tempdir().unwrap();
        let store = JobStore::open(dir.path()).unwrap();
        let job = store.create(request()).unwrap();
        store.transition(&job.id, JobStatus::Running, |_| {}).unwrap();
        store.transition(&job.id, JobStatus::Done, |r| r.error = None).unwrap();
        assert!(matches!(store.transition(&job.id, JobStatus::Running, |_| {}), Err(StoreError::Transition { .. })));
        assert!(store.transition(&job.id, JobStatus::Failed, |_| {}).is_err());
        assert_eq!(store.get(&job.id).unwrap().status, JobStatus::Done);
    }

    #[test]
    fn unfinished_jobs_fail_on_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let (queued, done) = {
            let store = JobStore::open(dir.path()).unwrap();
            let a = store.create(request()).unwrap();
            let b = store.create(request()).unwrap();
            store.transition(&b.id, JobStatus::Done, |_| {}).unwrap();
            (a.id, b.id)
        };
        assert_ne!(queued, done);
        let store = JobStore::open(dir.path()).unwrap();
        assert_eq!(store.get(&queued).unwrap().status, JobStatus::Failed);
        assert_eq!(store.get(&done).unwrap().status, JobStatus::Done);
    }
}
