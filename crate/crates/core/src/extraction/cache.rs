use crate::digest::sha256_hex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    raw: String,
}

pub fn cache_key(model_id: &str, prompt: &str) -> String {
    let mut buf = Vec::with_capacity(model_id.len() + prompt.len() + 1);
    buf.extend_from_slice(model_id.as_bytes());
    buf.push(0);
    buf.extend_from_slice(prompt.as_bytes());
    sha256_hex(&buf)
}

/// Append-only store of raw provider responses keyed by `(model_id, prompt)`.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: HashMap<String, String>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or starts) the cache file at `path`. Later lines win on duplicate keys.
    pub fn open(path: &Path) -> io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(l) => {
                        entries.insert(l.key, l.raw);
                    }
                    Err(e) => tracing::warn!("ignoring corrupt cache line: {e}"),
                }
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn put(&mut self, key: String, raw: String) -> io::Result<()> {
        if self.entries.get(&key) == Some(&raw) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&CacheLine {
                key: key.clone(),
                raw: raw.clone(),
            })?;
            writeln!(file, "{line}")?;
        }
        self.entries.insert(key, raw);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
