//! File-backed model storage: `{id}.coml.xml` plus a `{id}.meta.json`
//! sidecar with timestamps. Both are replaced atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::ops::{load, ApiError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelInfo {
    pub id: String,
    pub created_at: String,
    pub updated_at: String,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    // serializes writers so the sidecar agrees with the model file
    writing: Mutex<()>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn io_error(e: std::io::Error) -> ApiError {
    ApiError::new(500, "STORAGE", e.to_string())
}

fn replace(dir: &Path, target: &Path, bytes: &[u8]) -> Result<(), ApiError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error)?;
    tmp.write_all(bytes).map_err(io_error)?;
    tmp.as_file().sync_all().map_err(io_error)?;
    tmp.persist(target).map_err(|e| io_error(e.error))?;
    Ok(())
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Store { dir, writing: Mutex::new(()) })
    }

    fn model_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.coml.xml"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.meta.json"))
    }

    fn check_id(id: &str) -> Result<(), ApiError> {
        if valid_id(id) {
            Ok(())
        } else {
            Err(ApiError::bad_request("BAD_ID", format!("model id `{id}` must be 1-64 letters, digits, `_` or `-`")))
        }
    }

    /// Stores `coml` under `id`; true if the id was new.
    pub fn put(&self, id: &str, coml: &str) -> Result<(ModelInfo, bool), ApiError> {
        Self::check_id(id)?;
        load(coml)?;
        let _guard = self.writing.lock().unwrap_or_else(|e| e.into_inner());
        let now = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
        let previous = self.info(id).ok();
        let created = previous.is_none();
        let info = ModelInfo {
            id: id.to_string(),
            created_at: previous.map(|p| p.created_at).unwrap_or_else(|| now.clone()),
            updated_at: now,
        };
        replace(&self.dir, &self.model_path(id), coml.as_bytes())?;
        replace(&self.dir, &self.meta_path(id), serde_json::to_string(&info).expect("plain struct").as_bytes())?;
        Ok((info, created))
    }

    pub fn get(&self, id: &str) -> Result<String, ApiError> {
        Self::check_id(id)?;
        match fs::read_to_string(self.model_path(id)) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::new(404, "NOT_FOUND", format!("no model `{id}`"))),
            Err(e) => Err(io_error(e)),
        }
    }

    pub fn info(&self, id: &str) -> Result<ModelInfo, ApiError> {
        let raw = fs::read_to_string(self.meta_path(id)).map_err(|_| ApiError::new(404, "NOT_FOUND", format!("no model `{id}`")))?;
        serde_json::from_str(&raw).map_err(|e| ApiError::new(500, "STORAGE", e.to_string()))
    }

    /// Stored models sorted by id.
    pub fn list(&self) -> Result<Vec<ModelInfo>, ApiError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_error)? {
            let name = entry.map_err(io_error)?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".coml.xml") {
                if let Ok(info) = self.info(id) {
                    out.push(info);
                }
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_restricted() {
        assert!(valid_id("course-2024_a"));
        assert!(!valid_id("../etc"));
        assert!(!valid_id(""));
    }

    #[test]
    fn put_get_list() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let coml = norma_core::coml::emit_coml(&norma_core::contract::ContractModel::new("t")).unwrap();
        let (first, created) = store.put("m1", &coml).unwrap();
        assert!(created);
        let (second, created) = store.put("m1", &coml).unwrap();
        assert!(!created);
        assert_eq!(first.created_at, second.created_at);
        assert_eq!(store.get("m1").unwrap(), coml);
        assert_eq!(store.list().unwrap(), vec![second]);
        assert_eq!(store.get("m2").unwrap_err().status, 404);
        assert_eq!(store.put("m3", "<bad").unwrap_err().code, "XML_MALFORMED");
    }
}
