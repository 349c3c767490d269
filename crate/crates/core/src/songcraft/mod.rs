//! Practice songs built from the learner's weakest vocabulary.
//!
//! A song is made by picking under-learned words, dropping their kana
//! readings into the `{SLOT}` markers of a [`LyricTemplate`], pairing each
//! mora of the filled lyric with one melody note, and rendering the score
//! through the singing port.

mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jp_text::{kana_to_phonemes, mora_count, KanaString, PhonemeUnit, TextError};
use crate::providers::{ProviderError, ProviderSet};
use crate::store::{ClipId, ClipStore, StoreError};
use crate::vocab::{VocabDatabase, VocabEntry};

pub use template::{LyricLine, LyricPiece, LyricTemplate, TemplateLibrary, TemplateSummary, TEMPLATE_HEADER};

pub const MIN_MIDI_PITCH: u8 = 36;
pub const MAX_MIDI_PITCH: u8 = 96;

/// Candidate substitutions tried per slot before giving up.
pub const MAX_SLOT_ATTEMPTS: usize = 20;

#[derive(Debug, Error)]
pub enum SongError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("slot count must be at least 1")]
    InvalidSlotCount,
    #[error("template has {expected} slot(s) but {got} word(s) were supplied")]
    SlotArityMismatch { expected: usize, got: usize },
    #[error("filled lyric has {got} morae but the melody has {expected} notes")]
    MoraOverflow { expected: usize, got: usize },
    #[error("lyric has {morae} morae but melody has {notes} notes")]
    LengthMismatch { morae: usize, notes: usize },
    #[error("no candidate words fit the template's slots after {attempts} attempts")]
    NoFittingWords { attempts: usize },
    #[error("invalid note: {0}")]
    InvalidNote(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("reading of {surface:?} cannot be sung: {source}")]
    UnsingableReading { surface: String, source: TextError },
    #[error("singing synthesis failed: {0}")]
    Synthesis(#[from] ProviderError),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

/// One melody note: a MIDI pitch held for a positive number of seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNote", into = "RawNote")]
pub struct MelodyNote {
    midi_pitch: u8,
    duration: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNote {
    midi_pitch: u8,
    duration: f64,
}

impl TryFrom<RawNote> for MelodyNote {
    type Error = SongError;

    fn try_from(raw: RawNote) -> Result<Self, Self::Error> {
        MelodyNote::new(raw.midi_pitch, raw.duration)
    }
}

impl From<MelodyNote> for RawNote {
    fn from(n: MelodyNote) -> Self {
        RawNote {
            midi_pitch: n.midi_pitch,
            duration: n.duration,
        }
    }
}

impl MelodyNote {
    pub fn new(midi_pitch: u8, duration: f64) -> Result<Self, SongError> {
        if !(MIN_MIDI_PITCH..=MAX_MIDI_PITCH).contains(&midi_pitch) {
            return Err(SongError::InvalidNote(format!(
                "pitch {midi_pitch} outside {MIN_MIDI_PITCH}..={MAX_MIDI_PITCH}"
            )));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(SongError::InvalidNote(format!("duration {duration} must be > 0")));
        }
        Ok(Self { midi_pitch, duration })
    }

    pub fn midi_pitch(&self) -> u8 {
        self.midi_pitch
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNote {
    pub note: MelodyNote,
    pub phonemes: PhonemeUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongScore {
    pub notes: Vec<ScoredNote>,
    pub lyric_text: KanaString,
    pub slot_words: Vec<String>,
    /// Set when no learning words existed and learned words filled the slots.
    pub fallback_learned: bool,
}

impl SongScore {
    pub fn total_duration(&self) -> f64 {
        self.notes.iter().map(|n| n.note.duration()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedSong {
    /// Content id of the rendered WAV; doubles as the audio reference.
    pub song_id: ClipId,
    pub score: SongScore,
    pub audio_ref: ClipId,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotWord {
    pub surface: String,
    pub reading: String,
}

impl From<&VocabEntry> for SlotWord {
    fn from(e: &VocabEntry) -> Self {
        Self {
            surface: e.surface.clone(),
            reading: e.reading.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSelection {
    pub words: Vec<SlotWord>,
    pub fallback_learned: bool,
}

/// Learning words in (progress, surface) order, or learned words flagged as
/// fallback when nothing is still being learned.
fn candidates(db: &VocabDatabase) -> Result<(Vec<&VocabEntry>, bool), SongError> {
    if db.is_empty() {
        return Err(SongError::EmptyVocabulary);
    }
    let ordered = db.display_order();
    let learning: Vec<&VocabEntry> = ordered.iter().copied().filter(|e| !e.progress.is_learned()).collect();
    if learning.is_empty() {
        Ok((ordered, true))
    } else {
        Ok((learning, false))
    }
}

pub fn select_slot_words(db: &VocabDatabase, n: usize) -> Result<SlotSelection, SongError> {
    if n == 0 {
        return Err(SongError::InvalidSlotCount);
    }
    let (pool, fallback_learned) = candidates(db)?;
    Ok(SlotSelection {
        words: pool.iter().cycle().take(n).map(|e| SlotWord::from(*e)).collect(),
        fallback_learned,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPlacement {
    pub slot_index: usize,
    pub line_index: usize,
    pub surface: String,
    pub reading: String,
    pub mora_start: usize,
    pub mora_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilledLyric {
    pub lyric: KanaString,
    pub placements: Vec<SlotPlacement>,
}

pub fn fill_template(template: &LyricTemplate, words: &[SlotWord]) -> Result<FilledLyric, SongError> {
    let expected = template.slot_count();
    if words.len() != expected {
        return Err(SongError::SlotArityMismatch {
            expected,
            got: words.len(),
        });
    }
    let mut lyric = String::new();
    let mut placements = Vec::with_capacity(expected);
    let mut morae = 0;
    let mut next_word = words.iter();
    for (line_index, line) in template.lines().iter().enumerate() {
        for piece in &line.pieces {
            match piece {
                LyricPiece::Text(text) => {
                    lyric.push_str(text.as_str());
                    morae += mora_count(text).map_err(|e| SongError::InvalidTemplate(e.to_string()))?;
                }
                LyricPiece::Slot => {
                    let word = next_word.next().expect("slot count checked above");
                    let reading = KanaString::parse(&word.reading)
                        .map_err(|source| SongError::UnsingableReading {
                            surface: word.surface.clone(),
                            source,
                        })?;
                    let len = match mora_count(&reading) {
                        Ok(0) => Err(SongError::UnsingableReading {
                            surface: word.surface.clone(),
                            source: TextError::UnmappableCodePoint { position: 0 },
                        }),
                        Ok(n) => Ok(n),
                        Err(source) => Err(SongError::UnsingableReading {
                            surface: word.surface.clone(),
                            source,
                        }),
                    }?;
                    placements.push(SlotPlacement {
                        slot_index: placements.len(),
                        line_index,
                        surface: word.surface.clone(),
                        reading: word.reading.clone(),
                        mora_start: morae,
                        mora_len: len,
                    });
                    lyric.push_str(reading.as_str());
                    morae += len;
                }
            }
        }
    }
    let lyric = KanaString::parse(&lyric).expect("concatenated kana is kana");
    // pieces can merge at their seams (き + ゃ), so count the whole lyric
    let total = mora_count(&lyric).map_err(|e| SongError::InvalidTemplate(e.to_string()))?;
    if total != template.melody().len() {
        return Err(SongError::MoraOverflow {
            expected: template.melody().len(),
            got: total,
        });
    }
    Ok(FilledLyric { lyric, placements })
}

/// Pairs the i-th mora with the i-th note.
pub fn align_to_melody(lyric: &KanaString, melody: &[MelodyNote]) -> Result<SongScore, SongError> {
    let units = kana_to_phonemes(lyric).map_err(|source| SongError::UnsingableReading {
        surface: lyric.to_string(),
        source,
    })?;
    if units.len() != melody.len() {
        return Err(SongError::LengthMismatch {
            morae: units.len(),
            notes: melody.len(),
        });
    }
    Ok(SongScore {
        notes: melody
            .iter()
            .zip(units)
            .map(|(note, phonemes)| ScoredNote { note: *note, phonemes })
            .collect(),
        lyric_text: lyric.clone(),
        slot_words: Vec::new(),
        fallback_learned: false,
    })
}

/// Finds the first slot assignment, in per-slot candidate order, whose
/// readings exactly fill the template's free morae.
///
/// Slot `i` tries candidates starting at position `i` of the pool (so the
/// first assignment tried is the round-robin selection), at most
/// [`MAX_SLOT_ATTEMPTS`] per slot.
fn search_assignment(template: &LyricTemplate, pool: &[&VocabEntry]) -> Result<Vec<SlotWord>, SongError> {
    let slots = template.slot_count();
    let budget = template
        .melody()
        .len()
        .checked_sub(template.fixed_morae())
        .ok_or_else(|| SongError::InvalidTemplate("fixed lyric longer than melody".into()))?;
    let sizes: Vec<Option<usize>> = pool
        .iter()
        .map(|e| {
            KanaString::parse(&e.reading)
                .ok()
                .and_then(|k| mora_count(&k).ok())
                .filter(|&n| n > 0)
        })
        .collect();
    let tries = pool.len().min(MAX_SLOT_ATTEMPTS);

    fn dfs(
        slot: usize,
        slots: usize,
        remaining: usize,
        tries: usize,
        sizes: &[Option<usize>],
        chosen: &mut Vec<usize>,
        attempts: &mut usize,
    ) -> bool {
        if slot == slots {
            return remaining == 0;
        }
        for k in 0..tries {
            let idx = (slot + k) % sizes.len();
            *attempts += 1;
            let Some(size) = sizes[idx] else { continue };
            if size > remaining || (slot + 1 == slots && size != remaining) {
                continue;
            }
            chosen.push(idx);
            if dfs(slot + 1, slots, remaining - size, tries, sizes, chosen, attempts) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    let mut chosen = Vec::with_capacity(slots);
    let mut attempts = 0;
    if dfs(0, slots, budget, tries, &sizes, &mut chosen, &mut attempts) {
        Ok(chosen.into_iter().map(|i| SlotWord::from(pool[i])).collect())
    } else {
        Err(SongError::NoFittingWords { attempts })
    }
}

/// Builds the score for a template from a vocabulary snapshot without
/// rendering it.
pub fn compose_score(db: &VocabDatabase, template: &LyricTemplate) -> Result<SongScore, SongError> {
    let (pool, fallback_learned) = candidates(db)?;
    let words = search_assignment(template, &pool)?;
    let filled = fill_template(template, &words)?;
    let mut score = align_to_melody(&filled.lyric, template.melody())?;
    score.slot_words = words.into_iter().map(|w| w.surface).collect();
    score.fallback_learned = fallback_learned;
    Ok(score)
}

/// Select, fill, align, render and persist one practice song.
pub fn generate_song(
    db: &VocabDatabase,
    template: &LyricTemplate,
    providers: &ProviderSet,
    clips: &dyn ClipStore,
) -> Result<RenderedSong, SongError> {
    let score = compose_score(db, template)?;
    let clip = providers.singing_synth.render(&score)?;
    let audio_ref = clips.put_clip(&clip)?;
    Ok(RenderedSong {
        song_id: audio_ref.clone(),
        duration_seconds: clip.duration_seconds(),
        score,
        audio_ref,
    })
}
