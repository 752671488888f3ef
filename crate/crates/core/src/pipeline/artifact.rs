//! Stage artifacts: JSON Lines files with a `.meta.json` sidecar naming the
//! stage and the hash of everything that determined the artifact.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub stage: String,
    pub config_hash: String,
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

/// Hex SHA-256 of the canonical (key-sorted) JSON encoding of `value`.
pub fn hash_value(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a file, or of every regular file below a directory (by
/// relative name, in sorted order).
pub fn hash_path(path: &Path) -> Result<String> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if !meta.is_dir() {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        return Ok(hash_bytes(&bytes));
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut h = Sha256::new();
    for p in entries {
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        h.update(p.file_name().unwrap_or_default().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(h.finalize()))
}

/// Writes through a temporary sibling and a rename so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_meta(artifact: &Path) -> Result<Option<ArtifactMeta>> {
    let path = meta_path(artifact);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::format(&path, e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&path, e)),
    }
}

pub fn write_meta(artifact: &Path, meta: &ArtifactMeta) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    write_atomic(&meta_path(artifact), text.as_bytes())
}

/// Writes an artifact and its sidecar.
pub fn write_artifact(path: &Path, bytes: &[u8], meta: &ArtifactMeta) -> Result<()> {
    write_atomic(path, bytes)?;
    write_meta(path, meta)
}

/// Refuses an upstream artifact whose sidecar is missing or carries another hash.
pub fn check_upstream(path: &Path, stage: &str, expected: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing artifact; run `{stage}` first"),
            ),
        });
    }
    let found = read_meta(path)?.map(|m| m.config_hash).unwrap_or_else(|| "none".into());
    if found != expected {
        return Err(Error::StaleArtifact {
            path: path.to_path_buf(),
            stage: stage.to_string(),
            expected: expected.to_string(),
            found,
        });
    }
    Ok(())
}

/// Parses JSON Lines. With `tolerate_torn_tail`, an unparsable final line (an
/// interrupted append) is dropped instead of failing.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, tolerate_torn_tail: bool) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if tolerate_torn_tail && Some(i) == last => {
                log::warn!("{}: dropping torn final line {}", path.display(), i + 1);
            }
            Err(e) => return Err(Error::format(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

/// Serialized appends to a cache file shared by worker threads.
pub struct Appender {
    path: PathBuf,
    file: Mutex<fs::File>,
}

impl Appender {
    pub fn open(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn append<T: Serialize>(&self, item: &T) -> Result<()> {
        let mut line = serde_json::to_string(item)?;
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}
