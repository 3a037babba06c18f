use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EditPlan, HistoryEntry, SessionState};
use crate::error::{Error, Result};

const MANIFEST: &str = "manifest.json";
const HISTORY: &str = "history.jsonl";

/// Everything in a session except its history.
#[derive(Serialize, Deserialize)]
struct Manifest {
    id: String,
    plan: EditPlan,
    #[serde(default)]
    masks: Vec<String>,
    current_image: String,
    created: chrono::DateTime<chrono::Utc>,
    updated: chrono::DateTime<chrono::Utc>,
}

/// Sessions on disk: `<root>/<session id>/{manifest.json, history.jsonl}`.
/// The manifest is replaced atomically; history lines are only appended.
#[derive(Debug, Clone)]
pub struct SessionRepository {
    root: PathBuf,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

impl SessionRepository {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(SessionRepository { root })
    }

    fn dir(&self, id: &str) -> Result<PathBuf> {
        if !valid_session_id(id) {
            return Err(Error::invalid(format!("malformed session id `{id}`")));
        }
        Ok(self.root.join(id))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.dir(id).map(|d| d.join(MANIFEST).is_file()).unwrap_or(false)
    }

    pub fn save(&self, session: &SessionState) -> Result<()> {
        let dir = self.dir(&session.id)?;
        std::fs::create_dir_all(&dir)?;
        let on_disk = count_lines(&dir.join(HISTORY))?;
        if on_disk > session.history.len() {
            return Err(Error::Contract(format!(
                "session {} history shrank from {on_disk} to {} entries",
                session.id,
                session.history.len()
            )));
        }
        if on_disk < session.history.len() {
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(HISTORY))?;
            for entry in &session.history[on_disk..] {
                let mut line = serde_json::to_vec(entry)?;
                line.push(b'\n');
                f.write_all(&line)?;
            }
            f.sync_data()?;
        }
        let manifest = Manifest {
            id: session.id.clone(),
            plan: session.plan.clone(),
            masks: session.masks.clone(),
            current_image: session.current_image().to_string(),
            created: session.created,
            updated: session.updated,
        };
        let tmp = dir.join(format!(".{MANIFEST}.{}", uuid::Uuid::new_v4()));
        std::fs::write(&tmp, serde_json::to_vec_pretty(&manifest)?)?;
        std::fs::rename(&tmp, dir.join(MANIFEST))?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<SessionState> {
        let dir = self.dir(id)?;
        let bytes = match std::fs::read(dir.join(MANIFEST)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::AssetNotFound(format!("session {id}")))
            }
            Err(e) => return Err(e.into()),
        };
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        let mut history = Vec::new();
        if let Ok(f) = std::fs::File::open(dir.join(HISTORY)) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    history.push(serde_json::from_str::<HistoryEntry>(&line)?);
                }
            }
        }
        Ok(SessionState {
            id: manifest.id,
            plan: manifest.plan,
            history,
            masks: manifest.masks,
            created: manifest.created,
            updated: manifest.updated,
        })
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for e in std::fs::read_dir(&self.root)? {
            let e = e?;
            if let Some(name) = e.file_name().to_str() {
                if self.exists(name) {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

fn count_lines(path: &Path) -> Result<usize> {
    match std::fs::File::open(path) {
        Ok(f) => {
            let mut n = 0;
            for line in BufReader::new(f).lines() {
                if !line?.trim().is_empty() {
                    n += 1;
                }
            }
            Ok(n)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e.into()),
    }
}
