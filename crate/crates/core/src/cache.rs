//! Content-addressed, append-only store of raw elicitation results.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! <exp>/cache.jsonl   one ScoreRecord per line, each with a sha256 checksum
//! <exp>/cache.lock    present while a writer holds the store
//! ```
//!
//! A record's checksum is the sha256 of the compact JSON of the record without
//! its `checksum` field. Lines that fail to parse or verify are skipped on load;
//! if their key can still be recovered, `get` on that key reports
//! [`CacheError::StoreCorrupted`] until a fresh record is appended for it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CacheError;
use crate::sha256_hex;

pub const CACHE_FILE: &str = "cache.jsonl";
pub const LOCK_FILE: &str = "cache.lock";

/// sha256 over (prompt text, model id, run index, temperature), hex encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(prompt: &str, model_id: &str, run_index: u32, temperature: f64) -> Self {
        let mut hasher = Sha256::new();
        // Length prefixes keep field boundaries unambiguous.
        for field in [prompt.as_bytes(), model_id.as_bytes()] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field);
        }
        hasher.update(run_index.to_le_bytes());
        hasher.update(temperature.to_bits().to_le_bytes());
        Self(hex::encode(hasher.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub key: CacheKey,
    pub response_text: String,
    pub parsed_ok: bool,
    pub created_at: String,
    #[serde(default)]
    pub backend_metadata: BTreeMap<String, Value>,
}

impl ScoreRecord {
    pub fn new(key: CacheKey, response_text: impl Into<String>) -> Self {
        Self {
            key,
            response_text: response_text.into(),
            parsed_ok: true,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            backend_metadata: BTreeMap::new(),
        }
    }

    fn checksum(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("record serializes").as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
struct StoredLine {
    #[serde(flatten)]
    record: ScoreRecord,
    checksum: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub records: usize,
    /// 1-based line numbers that failed to parse or verify.
    pub corrupted_lines: Vec<usize>,
    pub corrupted_keys: Vec<String>,
}

#[derive(Debug)]
struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self, CacheError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CacheError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(CacheError::StoreUnwritable(e.to_string())),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug)]
enum Backing {
    Memory,
    ReadOnly,
    File {
        file: File,
        needs_newline: bool,
        _lock: LockGuard,
    },
}

#[derive(Debug)]
struct Inner {
    records: HashMap<CacheKey, ScoreRecord>,
    corrupted: HashSet<String>,
    corrupted_lines: Vec<usize>,
    backing: Backing,
}

/// Thread-safe handle; all writes go through one appender.
#[derive(Debug)]
pub struct ScoreCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl ScoreCache {
    /// Volatile store, for tests and throwaway runs.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Inner {
                records: HashMap::new(),
                corrupted: HashSet::new(),
                corrupted_lines: Vec::new(),
                backing: Backing::Memory,
            }),
        }
    }

    /// Opens `<dir>/cache.jsonl` for reading and appending, creating it if needed.
    ///
    /// Fails with [`CacheError::Locked`] while another writer holds `<dir>/cache.lock`.
    pub fn open(dir: &Path) -> Result<Self, CacheError> {
        fs::create_dir_all(dir).map_err(|e| CacheError::StoreUnwritable(e.to_string()))?;
        let lock = LockGuard::acquire(dir)?;
        let path = dir.join(CACHE_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(|e| CacheError::StoreUnwritable(e.to_string()))?;

        let needs_newline = {
            let len = file.metadata()?.len();
            if len == 0 {
                false
            } else {
                let mut last = [0u8; 1];
                file.seek(SeekFrom::Start(len - 1))?;
                file.read_exact(&mut last)?;
                last[0] != b'\n'
            }
        };
        file.seek(SeekFrom::Start(0))?;
        let mut inner = load(BufReader::new(&file))?;
        inner.backing = Backing::File {
            file,
            needs_newline,
            _lock: lock,
        };
        Ok(Self {
            path: Some(path),
            inner: Mutex::new(inner),
        })
    }

    /// Opens an existing store without taking the lock; `put` fails with
    /// [`CacheError::StoreUnwritable`].
    pub fn open_read_only(dir: &Path) -> Result<Self, CacheError> {
        let path = dir.join(CACHE_FILE);
        let inner = match File::open(&path) {
            Ok(file) => load(BufReader::new(file))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Inner {
                records: HashMap::new(),
                corrupted: HashSet::new(),
                corrupted_lines: Vec::new(),
                backing: Backing::ReadOnly,
            },
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            path: Some(path),
            inner: Mutex::new(inner),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<ScoreRecord>, CacheError> {
        let inner = self.lock();
        if let Some(record) = inner.records.get(key) {
            return Ok(Some(record.clone()));
        }
        if inner.corrupted.contains(key.as_str()) {
            return Err(CacheError::StoreCorrupted {
                key: key.to_string(),
            });
        }
        Ok(None)
    }

    /// Appends `record`; returns once it is on disk.
    ///
    /// Re-putting an identical response is a no-op. A different response for a
    /// stored key is rejected: runs are immutable.
    pub fn put(&self, record: ScoreRecord) -> Result<(), CacheError> {
        let mut inner = self.lock();
        if let Some(existing) = inner.records.get(&record.key) {
            return if existing.response_text == record.response_text {
                Ok(())
            } else {
                Err(CacheError::ConflictingRecord {
                    key: record.key.to_string(),
                })
            };
        }

        match &mut inner.backing {
            Backing::Memory => {}
            Backing::ReadOnly => {
                return Err(CacheError::StoreUnwritable("store opened read-only".into()))
            }
            Backing::File {
                file,
                needs_newline,
                ..
            } => {
                let line = serde_json::to_string(&StoredLine {
                    checksum: record.checksum(),
                    record: record.clone(),
                })
                .expect("record serializes");
                let mut buf = Vec::with_capacity(line.len() + 2);
                if *needs_newline {
                    buf.push(b'\n');
                }
                buf.extend_from_slice(line.as_bytes());
                buf.push(b'\n');
                file.write_all(&buf)
                    .and_then(|_| file.sync_data())
                    .map_err(|e| CacheError::StoreUnwritable(e.to_string()))?;
                *needs_newline = false;
            }
        }
        inner.corrupted.remove(record.key.as_str());
        inner.records.insert(record.key.clone(), record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.lock();
        let mut corrupted_keys: Vec<String> = inner.corrupted.iter().cloned().collect();
        corrupted_keys.sort();
        CacheStats {
            records: inner.records.len(),
            corrupted_lines: inner.corrupted_lines.clone(),
            corrupted_keys,
        }
    }

    /// All intact records, ordered by key.
    pub fn records(&self) -> Vec<ScoreRecord> {
        let mut all: Vec<ScoreRecord> = self.lock().records.values().cloned().collect();
        all.sort_by(|a, b| a.key.cmp(&b.key));
        all
    }
}

fn load(reader: impl BufRead) -> Result<Inner, CacheError> {
    let mut records = HashMap::new();
    let mut corrupted = HashSet::new();
    let mut corrupted_lines = Vec::new();

    for (i, line) in reader.split(b'\n').enumerate() {
        let bytes = line?;
        if bytes.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let text = String::from_utf8_lossy(&bytes);
        match serde_json::from_str::<StoredLine>(&text) {
            Ok(stored) if stored.record.checksum() == stored.checksum => {
                corrupted.remove(stored.record.key.as_str());
                records.entry(stored.record.key.clone()).or_insert(stored.record);
            }
            _ => {
                corrupted_lines.push(i + 1);
                if let Some(key) = recover_key(&text) {
                    if !records.contains_key(&CacheKey(key.clone())) {
                        corrupted.insert(key);
                    }
                }
            }
        }
    }
    Ok(Inner {
        records,
        corrupted,
        corrupted_lines,
        backing: Backing::ReadOnly,
    })
}

/// Pulls `"key":"<64 hex>"` out of a damaged line.
fn recover_key(line: &str) -> Option<String> {
    let start = line.find("\"key\":\"")? + 7;
    let candidate = line.get(start..start + 64)?;
    let ok = candidate.bytes().all(|b| b.is_ascii_hexdigit())
        && line.as_bytes().get(start + 64) == Some(&b'"');
    ok.then(|| candidate.to_owned())
}
