//! Durable state under one data directory:
//!
//! ```text
//! <data_dir>/vocab.json        vocabulary database, canonical JSON
//! <data_dir>/sessions.ndjson   one session record per line, append-only
//! <data_dir>/audio/<sha256>.wav
//! ```
//!
//! `vocab.json` is rewritten through a temp file and an atomic rename, so a
//! crash mid-save leaves the previous version in place.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{AudioClip, WavError};
use crate::vocab::{InvariantViolation, ProgressLevel, SessionRecord, VocabDatabase, VocabEntry, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("unsupported schema_version {0}")]
    UnsupportedSchema(u64),
    #[error("database rejected: {0}")]
    Invalid(#[from] InvariantViolation),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::IoFailure {
        path: path.to_owned(),
        source,
    }
}

/// Content id of a stored clip: lowercase hex SHA-256 of its WAV bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClipId(String);

impl ClipId {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        if text.len() == 64 && text.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            Ok(Self(text.to_owned()))
        } else {
            Err(StoreError::NotFound(format!("audio {text:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ClipId {
    type Error = StoreError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<ClipId> for String {
    fn from(id: ClipId) -> Self {
        id.0
    }
}

impl fmt::Display for ClipId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Somewhere rendered clips can be put by content id.
pub trait ClipStore: Send + Sync {
    fn put_clip(&self, clip: &AudioClip) -> Result<ClipId, StoreError>;
}

/// Clips kept in memory; for tests and dry runs.
#[derive(Debug, Default)]
pub struct MemoryClips {
    clips: Mutex<HashMap<ClipId, Vec<u8>>>,
}

impl MemoryClips {
    pub fn contains(&self, id: &ClipId) -> bool {
        self.clips.lock().expect("clip map poisoned").contains_key(id)
    }

    pub fn get(&self, id: &ClipId) -> Option<Vec<u8>> {
        self.clips.lock().expect("clip map poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.clips.lock().expect("clip map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ClipStore for MemoryClips {
    fn put_clip(&self, clip: &AudioClip) -> Result<ClipId, StoreError> {
        let bytes = clip.to_wav();
        let id = ClipId::of_bytes(&bytes);
        self.clips.lock().expect("clip map poisoned").entry(id.clone()).or_insert(bytes);
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreRoot {
    data_dir: PathBuf,
}

impl StoreRoot {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
        }
    }

    /// Creates the data and audio directories if missing.
    pub fn init(data_dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = Self::new(data_dir);
        fs::create_dir_all(root.audio_dir()).map_err(io_err(&root.data_dir))?;
        Ok(root)
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.data_dir.join("vocab.json")
    }

    pub fn sessions_path(&self) -> PathBuf {
        self.data_dir.join("sessions.ndjson")
    }

    pub fn audio_dir(&self) -> PathBuf {
        self.data_dir.join("audio")
    }

    fn vocab_temp_path(&self) -> PathBuf {
        self.data_dir.join("vocab.json.tmp")
    }

    fn audio_path(&self, id: &ClipId) -> PathBuf {
        self.audio_dir().join(format!("{id}.wav"))
    }
}

impl ClipStore for StoreRoot {
    fn put_clip(&self, clip: &AudioClip) -> Result<ClipId, StoreError> {
        put_audio(self, clip)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskEntry {
    reading: String,
    meaning: String,
    progress: ProgressLevel,
    first_seen: DateTime<Utc>,
    last_seen: DateTime<Utc>,
    exposure_count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiskDatabase {
    schema_version: u32,
    entries: BTreeMap<String, DiskEntry>,
}

/// Canonical bytes for `db`: fixed field order, surfaces sorted, no
/// trailing newline.
pub fn serialize_db(db: &VocabDatabase) -> Vec<u8> {
    let disk = DiskDatabase {
        schema_version: db.schema_version,
        entries: db
            .entries
            .iter()
            .map(|(surface, e)| {
                (
                    surface.clone(),
                    DiskEntry {
                        reading: e.reading.clone(),
                        meaning: e.meaning.clone(),
                        progress: e.progress,
                        first_seen: e.first_seen,
                        last_seen: e.last_seen,
                        exposure_count: e.exposure_count,
                    },
                )
            })
            .collect(),
    };
    serde_json::to_vec_pretty(&disk).expect("database serializes")
}

pub fn parse_db(bytes: &[u8]) -> Result<VocabDatabase, StoreError> {
    let corrupt = |e: serde_json::Error| StoreError::CorruptStore(e.to_string());
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(corrupt)?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(StoreError::UnsupportedSchema(v)),
        None => return Err(StoreError::CorruptStore("missing schema_version".into())),
    }
    let disk: DiskDatabase = serde_json::from_value(value).map_err(corrupt)?;
    let db = VocabDatabase {
        schema_version: disk.schema_version,
        entries: disk
            .entries
            .into_iter()
            .map(|(surface, e)| {
                let entry = VocabEntry {
                    surface: surface.clone(),
                    reading: e.reading,
                    meaning: e.meaning,
                    progress: e.progress,
                    first_seen: e.first_seen,
                    last_seen: e.last_seen,
                    exposure_count: e.exposure_count,
                };
                (surface, entry)
            })
            .collect(),
    };
    db.validate()
        .map_err(|e| StoreError::CorruptStore(e.to_string()))?;
    Ok(db)
}

/// A missing file is an empty database.
pub fn load_db(root: &StoreRoot) -> Result<VocabDatabase, StoreError> {
    let path = root.vocab_path();
    match fs::read(&path) {
        Ok(bytes) => parse_db(&bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(VocabDatabase::new()),
        Err(e) => Err(io_err(&path)(e)),
    }
}

pub fn save_db(root: &StoreRoot, db: &VocabDatabase) -> Result<(), StoreError> {
    db.validate()?;
    let bytes = serialize_db(db);
    let temp = root.vocab_temp_path();
    write_file_synced(&temp, &bytes)?;
    commit_rename(&temp, &root.vocab_path())
}

/// Runs a save that dies after writing `written` bytes of the temp file and
/// before the rename, as a crash would.
#[doc(hidden)]
pub fn save_db_interrupted(root: &StoreRoot, db: &VocabDatabase, written: usize) -> Result<(), StoreError> {
    db.validate()?;
    let bytes = serialize_db(db);
    write_file_synced(&root.vocab_temp_path(), &bytes[..written.min(bytes.len())])
}

fn write_file_synced(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut file = File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))?;
    file.sync_all().map_err(io_err(path))
}

fn commit_rename(from: &Path, to: &Path) -> Result<(), StoreError> {
    fs::rename(from, to).map_err(io_err(to))?;
    if let Some(parent) = to.parent() {
        // directory fsync makes the rename durable; not every platform allows it
        if let Ok(dir) = File::open(parent) {
            let _ = dir.sync_all();
        }
    }
    Ok(())
}

static SESSION_LOG: Mutex<()> = Mutex::new(());

pub fn append_session(root: &StoreRoot, record: &SessionRecord) -> Result<(), StoreError> {
    let mut line = serde_json::to_vec(record).expect("session record serializes");
    line.push(b'\n');
    let path = root.sessions_path();
    let _guard = SESSION_LOG.lock().expect("session log lock poisoned");
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(io_err(&path))?;
    file.write_all(&line).map_err(io_err(&path))?;
    file.sync_data().map_err(io_err(&path))
}

/// Every record in the session log, oldest first.
pub fn load_sessions(root: &StoreRoot) -> Result<Vec<SessionRecord>, StoreError> {
    let path = root.sessions_path();
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(&path)(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| StoreError::CorruptStore(format!("sessions.ndjson line {}: {e}", i + 1)))
        })
        .collect()
}

/// The latest snapshot of each session, keyed by id.
pub fn latest_sessions(root: &StoreRoot) -> Result<HashMap<String, SessionRecord>, StoreError> {
    Ok(load_sessions(root)?
        .into_iter()
        .map(|r| (r.session_id.clone(), r))
        .collect())
}

pub fn put_audio(root: &StoreRoot, clip: &AudioClip) -> Result<ClipId, StoreError> {
    let bytes = clip.to_wav();
    let id = ClipId::of_bytes(&bytes);
    let path = root.audio_path(&id);
    if path.exists() {
        return Ok(id);
    }
    let temp = root.audio_dir().join(format!(".{id}.{}.tmp", uuid::Uuid::new_v4()));
    write_file_synced(&temp, &bytes)?;
    commit_rename(&temp, &path)?;
    Ok(id)
}

pub fn get_audio_bytes(root: &StoreRoot, id: &ClipId) -> Result<Vec<u8>, StoreError> {
    let path = root.audio_path(id);
    match fs::read(&path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(StoreError::NotFound(format!("audio {id}"))),
        Err(e) => Err(io_err(&path)(e)),
    }
}

pub fn get_audio(root: &StoreRoot, id: &ClipId) -> Result<AudioClip, StoreError> {
    let bytes = get_audio_bytes(root, id)?;
    AudioClip::from_wav(&bytes).map_err(|e: WavError| StoreError::CorruptStore(format!("audio {id}: {e}")))
}

/// Single-writer handle over a [`StoreRoot`].
///
/// Readers take the last committed snapshot without blocking; writers are
/// serialized, and the snapshot only moves after the file is on disk.
#[derive(Debug)]
pub struct Store {
    root: StoreRoot,
    writer: Mutex<()>,
    snapshot: RwLock<Arc<VocabDatabase>>,
}

#[derive(Debug, Error)]
pub enum CommitError<E> {
    #[error(transparent)]
    Rejected(E),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl Store {
    pub fn open(root: StoreRoot) -> Result<Self, StoreError> {
        fs::create_dir_all(root.audio_dir()).map_err(io_err(root.data_dir()))?;
        let db = load_db(&root)?;
        Ok(Self {
            root,
            writer: Mutex::new(()),
            snapshot: RwLock::new(Arc::new(db)),
        })
    }

    pub fn root(&self) -> &StoreRoot {
        &self.root
    }

    pub fn snapshot(&self) -> Arc<VocabDatabase> {
        Arc::clone(&self.snapshot.read().expect("snapshot lock poisoned"))
    }

    /// Runs `update` against the current state and persists its result. If
    /// `update` fails nothing is written.
    pub fn commit<T, E>(
        &self,
        update: impl FnOnce(&VocabDatabase) -> Result<(VocabDatabase, T), E>,
    ) -> Result<T, CommitError<E>> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let current = self.snapshot();
        let (next, value) = update(&current).map_err(CommitError::Rejected)?;
        if next != *current {
            save_db(&self.root, &next)?;
            *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(next);
        }
        Ok(value)
    }
}
