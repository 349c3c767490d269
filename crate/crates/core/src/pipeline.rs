//! One learner input, end to end.
//!
//! Stages run in a fixed order: transcribe (audio only), translate, explain
//! grammar, track vocabulary, synthesize pronunciation, store the clip.
//! Transcription, translation, tracking and storage failures are fatal and
//! leave the caller's database untouched. Grammar and synthesis failures
//! degrade the result and are listed in [`PipelineResult::degraded`].

use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::providers::{GrammarNote, ProviderError, ProviderSet, TranslationTriple};
use crate::store::{ClipId, ClipStore, StoreError};
use crate::vocab::{track_occurrences, TrackingError, VocabDatabase, VocabReport, WordOccurrence};

#[derive(Debug, Clone, PartialEq)]
pub enum InputPayload {
    Text(String),
    Audio(AudioClip),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerInput {
    pub payload: InputPayload,
    pub session_id: String,
    pub received_at: DateTime<Utc>,
}

impl LearnerInput {
    pub fn text(text: impl Into<String>, session_id: impl Into<String>, received_at: DateTime<Utc>) -> Self {
        Self {
            payload: InputPayload::Text(text.into()),
            session_id: session_id.into(),
            received_at,
        }
    }

    pub fn audio(clip: AudioClip, session_id: impl Into<String>, received_at: DateTime<Utc>) -> Self {
        Self {
            payload: InputPayload::Audio(clip),
            session_id: session_id.into(),
            received_at,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.payload {
            InputPayload::Text(_) => "text",
            InputPayload::Audio(_) => "audio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pronunciation {
    pub audio_id: ClipId,
    pub duration_seconds: f64,
}

/// A stage that failed without stopping the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradedStage {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub session_id: String,
    pub transcript: String,
    pub triple: TranslationTriple,
    pub grammar: Vec<GrammarNote>,
    pub vocab_report: VocabReport,
    pub pronunciation: Option<Pronunciation>,
    pub degraded: Vec<DegradedStage>,
    pub received_at: DateTime<Utc>,
    pub elapsed_ms: u64,
}

/// Fields dropped by [`PipelineResult::canonical`].
pub const VOLATILE_FIELDS: [&str; 2] = ["received_at", "elapsed_ms"];

impl PipelineResult {
    /// JSON form with the volatile timing fields removed, for comparisons.
    pub fn canonical(&self) -> serde_json::Value {
        canonicalize(serde_json::to_value(self).expect("result serializes"))
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.canonical()).expect("value serializes")
    }
}

/// Strips [`VOLATILE_FIELDS`] from a serialized result.
pub fn canonicalize(mut value: serde_json::Value) -> serde_json::Value {
    if let Some(map) = value.as_object_mut() {
        for key in VOLATILE_FIELDS {
            map.remove(key);
        }
    }
    value
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("transcription failed: {0}")]
    TranscriptionFailed(ProviderError),
    #[error("translation failed: {0}")]
    TranslationFailed(ProviderError),
    #[error("tracking failed: {0}")]
    TrackingFailed(Box<TrackingError>),
    #[error("storing pronunciation failed: {0}")]
    StorageFailed(StoreError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::TranscriptionFailed(_) => "TranscriptionFailed",
            Self::TranslationFailed(_) => "TranslationFailed",
            Self::TrackingFailed(_) => "TrackingFailed",
            Self::StorageFailed(_) => "StorageFailed",
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            Self::TranscriptionFailed(_) => "transcription",
            Self::TranslationFailed(_) => "translation",
            Self::TrackingFailed(_) => "tracking",
            Self::StorageFailed(_) => "storage",
        }
    }

    /// The provider failure behind this error, if any.
    pub fn provider_error(&self) -> Option<&ProviderError> {
        match self {
            Self::TranscriptionFailed(e) | Self::TranslationFailed(e) => Some(e),
            Self::TrackingFailed(t) => match t.as_ref() {
                TrackingError::LexiconFailure { cause, .. } => Some(cause),
            },
            Self::StorageFailed(_) => None,
        }
    }
}

/// Runs every stage for `input` against `db` and returns the post-tracking
/// database with the assembled result.
pub fn process_input(
    input: &LearnerInput,
    db: &VocabDatabase,
    providers: &ProviderSet,
    clips: &dyn ClipStore,
) -> Result<(VocabDatabase, PipelineResult), PipelineError> {
    let started = Instant::now();
    let mut degraded = Vec::new();

    let transcript = match &input.payload {
        InputPayload::Text(text) => text.clone(),
        InputPayload::Audio(clip) => providers
            .recognizer
            .transcribe(clip)
            .map_err(PipelineError::TranscriptionFailed)?,
    };
    if transcript.trim().is_empty() {
        return Err(PipelineError::TranslationFailed(ProviderError::UntranslatableInput(
            "empty text".into(),
        )));
    }

    let triple = providers
        .translator
        .translate(&transcript)
        .map_err(PipelineError::TranslationFailed)?;

    let grammar = providers.grammarian.explain(&triple).unwrap_or_else(|e| {
        degraded.push(DegradedStage {
            stage: "grammar".into(),
            message: e.to_string(),
        });
        Vec::new()
    });

    let occurrences: Vec<WordOccurrence<'_>> = triple
        .words()
        .map(|s| WordOccurrence::with_reading(&s.surface, s.reading.as_str()))
        .collect();
    let (next_db, vocab_report) = track_occurrences(&occurrences, db, &*providers.lexicon, input.received_at)
        .map_err(|e| PipelineError::TrackingFailed(Box::new(e)))?;

    let pronunciation = match providers.speech_synth.speak(&triple.kana) {
        Ok(clip) => Some(Pronunciation {
            audio_id: clips.put_clip(&clip).map_err(PipelineError::StorageFailed)?,
            duration_seconds: clip.duration_seconds(),
        }),
        Err(e) => {
            degraded.push(DegradedStage {
                stage: "synthesis".into(),
                message: e.to_string(),
            });
            None
        }
    };

    let result = PipelineResult {
        session_id: input.session_id.clone(),
        transcript,
        triple,
        grammar,
        vocab_report,
        pronunciation,
        degraded,
        received_at: input.received_at,
        elapsed_ms: u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX),
    };
    Ok((next_db, result))
}

#[derive(Debug, Error)]
#[error("input {index} failed: {cause}")]
pub struct AbortedAt {
    /// 1-based position of the failing input.
    pub index: usize,
    pub cause: PipelineError,
    /// State after the inputs before `index`.
    pub db: Box<VocabDatabase>,
    pub results: Vec<PipelineResult>,
}

/// Sequential fold of [`process_input`] over `inputs`.
pub fn replay_corpus(
    inputs: &[LearnerInput],
    db: &VocabDatabase,
    providers: &ProviderSet,
    clips: &dyn ClipStore,
) -> Result<(VocabDatabase, Vec<PipelineResult>), AbortedAt> {
    let mut current = db.clone();
    let mut results = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        match process_input(input, &current, providers, clips) {
            Ok((next, result)) => {
                current = next;
                results.push(result);
            }
            Err(cause) => {
                return Err(AbortedAt {
                    index: i + 1,
                    cause,
                    db: Box::new(current),
                    results,
                })
            }
        }
    }
    Ok((current, results))
}
