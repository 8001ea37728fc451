//! File-backed scenario store: one JSON document per id.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid scenario id '{0}': use 1-64 characters from [A-Za-z0-9_-]")]
    InvalidId(String),
    #[error("no scenario with id '{0}'")]
    NotFound(String),
    #[error("scenario store I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt scenario file: {0}")]
    Corrupt(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub payload: serde_json::Value,
    pub created_at: chrono::DateTime<chrono::Utc>,
}

#[derive(Debug)]
pub struct ScenarioStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

pub fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len())
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Content-derived id for payloads stored without one.
pub fn derived_id(payload: &serde_json::Value) -> String {
    let digest = Sha256::digest(payload.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl ScenarioStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(ScenarioStore {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(format!("{id}.json")))
    }

    /// Writes the entry; an existing entry with the same id is replaced.
    pub fn put(&self, id: Option<&str>, payload: serde_json::Value) -> Result<ScenarioEntry, StoreError> {
        let id = match id {
            Some(id) => id.to_string(),
            None => derived_id(&payload),
        };
        let path = self.path(&id)?;
        let entry = ScenarioEntry {
            id,
            payload,
            created_at: chrono::Utc::now(),
        };
        let bytes = serde_json::to_vec_pretty(&entry)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        log::info!("stored scenario {}", entry.id);
        Ok(entry)
    }

    pub fn get(&self, id: &str) -> Result<ScenarioEntry, StoreError> {
        let path = self.path(id)?;
        match fs::read(&path) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::NotFound(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_rules() {
        assert!(valid_id("a-b_C9"));
        assert!(!valid_id(""));
        assert!(!valid_id("../x"));
        assert!(!valid_id(&"x".repeat(65)));
        let id = derived_id(&serde_json::json!({"a": 1}));
        assert_eq!(id.len(), 16);
        assert!(valid_id(&id));
    }
}
