//! Operations shared by the HTTP service and the CLI.
//!
//! [`App`] owns the store handle, the provider bindings and the template
//! library. Every request that changes the vocabulary goes through the
//! store's single-writer commit, and nothing is written when a request fails.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::audio::AudioClip;
use crate::pipeline::{process_input, replay_corpus, InputPayload, LearnerInput, PipelineError, PipelineResult};
use crate::providers::{BindingSummary, ProviderError, ProviderSet};
use crate::songcraft::{generate_song, SongError, TemplateLibrary, TemplateSummary};
use crate::store::{self, ClipId, CommitError, Store, StoreError, StoreRoot};
use crate::vocab::{apply_to_session, format_progress_line, SessionRecord, StatusCounts, WordStatus};

/// Longest accepted audio upload.
pub const MAX_AUDIO_SECONDS: f64 = 30.0;
/// Largest accepted request body.
pub const MAX_UPLOAD_BYTES: usize = 2 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("input {index}: {cause}")]
    Replay { index: usize, cause: PipelineError },
    #[error(transparent)]
    Song(#[from] SongError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("no session {0:?}")]
    UnknownSession(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("audio is {0:.1} s; the limit is 30 s")]
    AudioTooLong(f64),
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
}

/// Wire form of every error: `{code, stage, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub stage: String,
    pub message: String,
}

impl AppError {
    fn pipeline(&self) -> Option<&PipelineError> {
        match self {
            Self::Pipeline(e) | Self::Replay { cause: e, .. } => Some(e),
            _ => None,
        }
    }

    fn provider(&self) -> Option<&ProviderError> {
        match self {
            Self::Song(SongError::Synthesis(e)) => Some(e),
            _ => self.pipeline().and_then(PipelineError::provider_error),
        }
    }

    pub fn code(&self) -> &'static str {
        if let Some(e) = self.pipeline() {
            return e.code();
        }
        match self {
            Self::Song(SongError::EmptyVocabulary) => "EmptyVocabulary",
            Self::Song(SongError::NoFittingWords { .. }) => "NoFittingWords",
            Self::Song(SongError::Synthesis(_)) => "SynthesisFailed",
            Self::Song(SongError::Storage(e)) | Self::Store(e) => match e {
                StoreError::NotFound(_) => "NotFound",
                StoreError::CorruptStore(_) | StoreError::UnsupportedSchema(_) => "CorruptStore",
                _ => "StorageFailed",
            },
            Self::Song(_) => "SongFailed",
            Self::UnknownTemplate(_) => "UnknownTemplate",
            Self::UnknownSession(_) => "NotFound",
            Self::BadRequest(_) => "BadRequest",
            Self::AudioTooLong(_) => "AudioTooLong",
            Self::InvalidAudio(_) => "InvalidAudio",
            Self::Pipeline(_) | Self::Replay { .. } => unreachable!("handled above"),
        }
    }

    pub fn stage(&self) -> &'static str {
        if let Some(e) = self.pipeline() {
            return e.stage();
        }
        match self {
            Self::Song(SongError::Storage(_)) | Self::Store(_) => "storage",
            Self::Song(SongError::Synthesis(_)) => "synthesis",
            Self::Song(_) | Self::UnknownTemplate(_) => "song",
            Self::AudioTooLong(_) | Self::InvalidAudio(_) => "transcription",
            _ => "request",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_owned(),
            stage: self.stage().to_owned(),
            message: self.to_string(),
        }
    }

    pub fn http_status(&self) -> u16 {
        if self.provider().is_some_and(ProviderError::is_upstream) {
            return 502;
        }
        match self.code() {
            "BadRequest" => 400,
            "NotFound" | "UnknownTemplate" => 404,
            "EmptyVocabulary" | "NoFittingWords" => 409,
            "AudioTooLong" => 413,
            "TranscriptionFailed" | "TranslationFailed" | "TrackingFailed" | "InvalidAudio" | "SongFailed"
            | "SynthesisFailed" => 422,
            _ => 500,
        }
    }

    /// Process exit status for the CLI; one value per error code.
    pub fn exit_code(&self) -> i32 {
        if self.provider().is_some_and(ProviderError::is_upstream) {
            return 12;
        }
        match self.code() {
            "BadRequest" => 2,
            "TranscriptionFailed" | "InvalidAudio" | "AudioTooLong" => 3,
            "TranslationFailed" => 4,
            "TrackingFailed" => 5,
            "EmptyVocabulary" => 6,
            "NoFittingWords" => 7,
            "UnknownTemplate" => 8,
            "NotFound" => 9,
            "SynthesisFailed" | "SongFailed" => 10,
            "CorruptStore" | "StorageFailed" => 11,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VocabFilter {
    #[default]
    All,
    Learning,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryView {
    pub surface: String,
    pub reading: String,
    pub meaning: String,
    pub progress: u8,
    pub exposure_count: u64,
    pub status: WordStatus,
    pub display_line: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabularyView {
    pub entries: Vec<EntryView>,
    pub counts: StatusCounts,
}

impl VocabularyView {
    pub fn display_lines(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.display_line.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SongView {
    pub song_id: ClipId,
    pub template_id: String,
    pub duration_seconds: f64,
    pub slot_words: Vec<String>,
    pub fallback_learned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub providers: BindingSummary,
}

#[derive(Debug)]
pub struct App {
    store: Store,
    providers: ProviderSet,
    templates: TemplateLibrary,
    default_session: String,
    sessions: Mutex<HashMap<String, SessionRecord>>,
}

impl App {
    pub fn open(root: StoreRoot, providers: ProviderSet, templates: TemplateLibrary) -> Result<Self, AppError> {
        let store = Store::open(root)?;
        let sessions = store::latest_sessions(store.root())?;
        Ok(Self {
            store,
            providers,
            templates,
            default_session: format!("default-{}", uuid::Uuid::new_v4()),
            sessions: Mutex::new(sessions),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn providers(&self) -> &ProviderSet {
        &self.providers
    }

    pub fn default_session(&self) -> &str {
        &self.default_session
    }

    fn session_id(&self, requested: Option<String>) -> Result<String, AppError> {
        match requested {
            None => Ok(self.default_session.clone()),
            Some(id) if id.is_empty() || id.len() > 128 || id.chars().any(char::is_control) => {
                Err(AppError::BadRequest("session_id must be 1-128 printable characters".into()))
            }
            Some(id) => Ok(id),
        }
    }

    /// Decodes and bounds-checks an uploaded WAV.
    pub fn decode_upload(bytes: &[u8]) -> Result<AudioClip, AppError> {
        if bytes.len() > MAX_UPLOAD_BYTES {
            return Err(AppError::BadRequest(format!("upload exceeds {MAX_UPLOAD_BYTES} bytes")));
        }
        let clip = AudioClip::from_wav(bytes).map_err(|e| AppError::InvalidAudio(e.to_string()))?;
        if clip.duration_seconds() > MAX_AUDIO_SECONDS {
            return Err(AppError::AudioTooLong(clip.duration_seconds()));
        }
        Ok(clip)
    }

    fn record_sessions<'a>(&self, results: impl IntoIterator<Item = &'a PipelineResult>) -> Result<(), AppError> {
        let mut sessions = self.sessions.lock().expect("session map poisoned");
        for result in results {
            let current = sessions
                .get(&result.session_id)
                .cloned()
                .unwrap_or_else(|| SessionRecord::new(result.session_id.clone(), result.received_at));
            let next = apply_to_session(&current, &result.vocab_report);
            store::append_session(self.store.root(), &next)?;
            sessions.insert(next.session_id.clone(), next);
        }
        Ok(())
    }

    /// One learner input through the pipeline, committed on success.
    pub fn process(
        &self,
        payload: InputPayload,
        session_id: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<PipelineResult, AppError> {
        let input = LearnerInput {
            payload,
            session_id: self.session_id(session_id)?,
            received_at: now,
        };
        let result = self
            .store
            .commit(|db| process_input(&input, db, &self.providers, self.store.root()))
            .map_err(|e| match e {
                CommitError::Rejected(e) => AppError::Pipeline(e),
                CommitError::Store(e) => AppError::Store(e),
            })?;
        self.record_sessions([&result])?;
        Ok(result)
    }

    /// Replays sentences in order. Inputs before a failure stay committed.
    pub fn replay(
        &self,
        sentences: &[String],
        session_id: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<Vec<PipelineResult>, AppError> {
        let session_id = self.session_id(session_id)?;
        let inputs: Vec<LearnerInput> = sentences
            .iter()
            .map(|s| LearnerInput::text(s.clone(), session_id.clone(), now))
            .collect();
        let outcome = self
            .store
            .commit::<_, std::convert::Infallible>(|db| {
                Ok(match replay_corpus(&inputs, db, &self.providers, self.store.root()) {
                    Ok((next, results)) => (next, Ok(results)),
                    Err(aborted) => (*aborted.db, Err((aborted.index, aborted.cause, aborted.results))),
                })
            })
            .map_err(|e| match e {
                CommitError::Store(e) => AppError::Store(e),
                CommitError::Rejected(never) => match never {},
            })?;
        match outcome {
            Ok(results) => {
                self.record_sessions(&results)?;
                Ok(results)
            }
            Err((index, cause, results)) => {
                self.record_sessions(&results)?;
                Err(AppError::Replay { index, cause })
            }
        }
    }

    pub fn vocabulary(&self, filter: VocabFilter) -> VocabularyView {
        let db = self.store.snapshot();
        let entries = db
            .display_order()
            .into_iter()
            .filter(|e| match filter {
                VocabFilter::All => true,
                VocabFilter::Learning => !e.progress.is_learned(),
                VocabFilter::Learned => e.progress.is_learned(),
            })
            .map(|e| EntryView {
                surface: e.surface.clone(),
                reading: e.reading.clone(),
                meaning: e.meaning.clone(),
                progress: e.progress.get(),
                exposure_count: e.exposure_count,
                status: e.status(),
                display_line: format_progress_line(e),
            })
            .collect();
        VocabularyView {
            entries,
            counts: db.counts(),
        }
    }

    pub fn song(&self, template_id: &str) -> Result<SongView, AppError> {
        let template = self
            .templates
            .get(template_id)
            .ok_or_else(|| AppError::UnknownTemplate(template_id.to_owned()))?;
        let db = self.store.snapshot();
        let song = generate_song(&db, template, &self.providers, self.store.root())?;
        Ok(SongView {
            song_id: song.song_id,
            template_id: template_id.to_owned(),
            duration_seconds: song.duration_seconds,
            slot_words: song.score.slot_words,
            fallback_learned: song.score.fallback_learned,
        })
    }

    pub fn audio(&self, id: &str) -> Result<Vec<u8>, AppError> {
        let id = ClipId::parse(id)?;
        Ok(store::get_audio_bytes(self.store.root(), &id)?)
    }

    pub fn session(&self, id: &str) -> Result<SessionRecord, AppError> {
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| AppError::UnknownSession(id.to_owned()))
    }

    pub fn templates(&self) -> Vec<TemplateSummary> {
        self.templates.iter().map(|t| t.summary()).collect()
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok",
            providers: self.providers.bindings(),
        }
    }
}
