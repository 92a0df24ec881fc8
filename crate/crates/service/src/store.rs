use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, PoisonError, RwLock};

use crate::error::{Result, ServiceError};
use crate::session::{QueryPayload, Session, SessionConfig, EVENTS_FILE};

pub type SharedSession = Arc<RwLock<Session>>;

/// Live sessions, optionally mirrored to `<root>/sessions/<id>/events.jsonl`.
#[derive(Debug, Default)]
pub struct SessionStore {
    root: Option<PathBuf>,
    sessions: RwLock<HashMap<String, SharedSession>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore::default()
    }

    /// Opens a store on disk and replays every session found there.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let dir = root.join("sessions");
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if !path.join(EVENTS_FILE).is_file() {
                continue;
            }
            let id = path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| ServiceError::Corrupt(format!("bad session directory {}", path.display())))?
                .to_string();
            let session = Session::load(id.clone(), &path)?;
            sessions.insert(id, Arc::new(RwLock::new(session)));
        }
        Ok(SessionStore {
            root: Some(root),
            sessions: RwLock::new(sessions),
        })
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join("sessions").join(id))
    }

    /// Builds a session under a fresh id and returns its first batch.
    pub fn create(&self, config: SessionConfig) -> Result<(String, Vec<QueryPayload>)> {
        let id = loop {
            let candidate = format!("{:016x}", rand::random::<u64>());
            let taken =
                self.read_map().contains_key(&candidate) || self.session_dir(&candidate).is_some_and(|d| d.exists());
            if !taken {
                break candidate;
            }
        };
        let mut session = Session::create(id.clone(), config)?;
        if let Some(dir) = self.session_dir(&id) {
            session.persist_to(&dir)?;
        }
        let pending = session.pending_queries()?;
        self.sessions
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(id.clone(), Arc::new(RwLock::new(session)));
        Ok((id, pending))
    }

    pub fn get(&self, id: &str) -> Result<SharedSession> {
        self.read_map()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.read_map().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn read_map(&self) -> std::sync::RwLockReadGuard<'_, HashMap<String, SharedSession>> {
        self.sessions.read().unwrap_or_else(PoisonError::into_inner)
    }
}
