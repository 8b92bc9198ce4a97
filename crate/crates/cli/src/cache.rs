use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

/// Content-addressed JSON store; a missing directory disables it.
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Cache { dir }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let digest = hex::encode(Sha256::digest(key.as_bytes()));
        self.dir.as_ref().map(|d| d.join(format!("{digest}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let s = std::fs::read_to_string(self.path(key)?).ok()?;
        serde_json::from_str(&s).ok()
    }

    /// Best effort: an unwritable cache only costs recomputation.
    pub fn put<T: Serialize>(&self, key: &str, value: &T) {
        if let Some(p) = self.path(key) {
            if let Some(parent) = p.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            let tmp = p.with_extension("tmp");
            if std::fs::write(&tmp, serde_json::to_string(value).expect("serializable")).is_ok() {
                let _ = std::fs::rename(&tmp, &p);
            }
        }
    }
}
