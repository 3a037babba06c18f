//! The job board: the only shared mutable state in the service.
//!
//! Status only moves forward: `queued → running → done | failed`, or
//! straight from `queued` to `failed`. Progress never decreases.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use matx_core::{Error, Stage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Segment,
    Transfer,
    ApplyPlan,
    Benchmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobError {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub message: String,
}

impl From<&Error> for JobError {
    fn from(e: &Error) -> Self {
        JobError {
            kind: e.kind().to_string(),
            stage: e.stage(),
            step: match e.root() {
                Error::Plan { step, .. } => Some(*step),
                _ => None,
            },
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<JobError>,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

#[derive(Debug, Default)]
pub struct JobBoard {
    jobs: Mutex<HashMap<String, Job>>,
}

impl JobBoard {
    pub fn create(&self, kind: JobKind, session: Option<String>) -> Job {
        let now = Utc::now();
        let job = Job {
            id: uuid::Uuid::new_v4().to_string(),
            kind,
            status: JobStatus::Queued,
            progress: 0.0,
            session,
            result: None,
            error: None,
            created: now,
            updated: now,
        };
        self.jobs
            .lock()
            .expect("job board poisoned")
            .insert(job.id.clone(), job.clone());
        job
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.jobs.lock().expect("job board poisoned").get(id).cloned()
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job) -> bool) {
        let mut jobs = self.jobs.lock().expect("job board poisoned");
        if let Some(job) = jobs.get_mut(id) {
            if f(job) {
                job.updated = Utc::now();
            }
        }
    }

    pub fn start(&self, id: &str) {
        self.update(id, |j| {
            let ok = j.status == JobStatus::Queued;
            if ok {
                j.status = JobStatus::Running;
            }
            ok
        });
    }

    pub fn progress(&self, id: &str, fraction: f64) {
        self.update(id, |j| {
            let p = fraction.clamp(0.0, 1.0);
            let ok = j.status == JobStatus::Running && p > j.progress;
            if ok {
                j.progress = p;
            }
            ok
        });
    }

    pub fn finish(&self, id: &str, result: serde_json::Value) {
        self.update(id, |j| {
            let ok = j.status == JobStatus::Running;
            if ok {
                j.status = JobStatus::Done;
                j.progress = 1.0;
                j.result = Some(result);
            }
            ok
        });
    }

    pub fn fail(&self, id: &str, error: JobError) {
        self.update(id, |j| {
            let ok = !j.status.is_terminal();
            if ok {
                j.status = JobStatus::Failed;
                j.error = Some(error);
            }
            ok
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_are_monotone() {
        let board = JobBoard::default();
        let job = board.create(JobKind::Transfer, None);
        board.progress(&job.id, 0.5);
        assert_eq!(board.get(&job.id).unwrap().progress, 0.0);
        board.start(&job.id);
        board.progress(&job.id, 0.5);
        board.progress(&job.id, 0.2);
        assert_eq!(board.get(&job.id).unwrap().progress, 0.5);
        board.finish(&job.id, serde_json::json!({"ok": true}));
        board.fail(&job.id, JobError::from(&Error::EmptyMask));
        board.start(&job.id);
        let done = board.get(&job.id).unwrap();
        assert_eq!(done.status, JobStatus::Done);
        assert_eq!(done.progress, 1.0);
        assert!(done.error.is_none());

        let other = board.create(JobKind::Segment, None);
        board.fail(&other.id, JobError::from(&Error::EmptyMask.at(Stage::Generate)));
        let failed = board.get(&other.id).unwrap();
        assert_eq!(failed.status, JobStatus::Failed);
        let err = failed.error.unwrap();
        assert_eq!(err.kind, "empty-mask");
        assert_eq!(err.stage, Some(Stage::Generate));
        board.finish(&other.id, serde_json::Value::Null);
        assert_eq!(board.get(&other.id).unwrap().status, JobStatus::Failed);
    }
}
