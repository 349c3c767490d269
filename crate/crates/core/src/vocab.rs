//! Per-word progress tracking.
//!
//! Every occurrence of a word in a translated sentence moves it one step
//! along a five-step lifecycle. Unknown words enter at step 1 with a meaning
//! fetched once from the [`Lexicon`]; words at step 5 are learned and stay
//! there.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jp_text::KanaString;
use crate::providers::{Lexicon, ProviderError};

/// Progress value at which a word counts as learned.
pub const MAX_PROGRESS: u8 = 5;

/// Current on-disk schema of [`VocabDatabase`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ProgressLevel(u8);

impl ProgressLevel {
    pub const FIRST: ProgressLevel = ProgressLevel(1);
    pub const LEARNED: ProgressLevel = ProgressLevel(MAX_PROGRESS);

    pub fn new(value: u8) -> Option<Self> {
        (1..=MAX_PROGRESS).contains(&value).then_some(Self(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_learned(self) -> bool {
        self.0 == MAX_PROGRESS
    }

    /// One step forward, saturating at [`MAX_PROGRESS`].
    pub fn advanced(self) -> Self {
        Self((self.0 + 1).min(MAX_PROGRESS))
    }
}

impl TryFrom<u8> for ProgressLevel {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("progress {value} outside 1..={MAX_PROGRESS}"))
    }
}

impl From<ProgressLevel> for u8 {
    fn from(value: ProgressLevel) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invariant violated for {surface:?}: {reason}")]
pub struct InvariantViolation {
    pub surface: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub surface: String,
    pub reading: String,
    pub meaning: String,
    pub progress: ProgressLevel,
    pub first_seen: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
    pub exposure_count: u64,
}

impl VocabEntry {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let fail = |reason: &str| {
            Err(InvariantViolation {
                surface: self.surface.clone(),
                reason: reason.to_owned(),
            })
        };
        if self.surface.is_empty() {
            return fail("empty surface");
        }
        if self.meaning.is_empty() {
            return fail("empty meaning");
        }
        if self.first_seen > self.last_seen {
            return fail("first_seen after last_seen");
        }
        if self.exposure_count < u64::from(self.progress.get()) {
            return fail("exposure_count below progress");
        }
        if !self.reading.is_empty() && KanaString::parse(&self.reading).is_err() {
            return fail("reading is not kana");
        }
        Ok(())
    }

    pub fn status(&self) -> WordStatus {
        if self.progress.is_learned() {
            WordStatus::Learned
        } else {
            WordStatus::Learning
        }
    }
}

/// The persistent word database, keyed by surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabDatabase {
    pub schema_version: u32,
    pub entries: BTreeMap<String, VocabEntry>,
}

impl Default for VocabDatabase {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            entries: BTreeMap::new(),
        }
    }
}

impl VocabDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, surface: &str) -> Option<&VocabEntry> {
        self.entries.get(surface)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts an entry under its own surface.
    pub fn insert(&mut self, entry: VocabEntry) -> Option<VocabEntry> {
        self.entries.insert(entry.surface.clone(), entry)
    }

    pub fn validate(&self) -> Result<(), InvariantViolation> {
        for (key, entry) in &self.entries {
            if key != &entry.surface {
                return Err(InvariantViolation {
                    surface: key.clone(),
                    reason: format!("keyed under {key:?} but surface is {:?}", entry.surface),
                });
            }
            entry.validate()?;
        }
        Ok(())
    }

    /// Entries ordered by progress ascending, then surface by code point.
    pub fn display_order(&self) -> Vec<&VocabEntry> {
        let mut entries: Vec<&VocabEntry> = self.entries.values().collect();
        entries.sort_by(|a, b| (a.progress, &a.surface).cmp(&(b.progress, &b.surface)));
        entries
    }

    pub fn display_lines(&self) -> Vec<String> {
        self.display_order().into_iter().map(format_progress_line).collect()
    }

    pub fn counts(&self) -> StatusCounts {
        let learned = self.entries.values().filter(|e| e.progress.is_learned()).count();
        StatusCounts {
            learning: self.entries.len() - learned,
            learned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub learning: usize,
    pub learned: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordStatus {
    Unknown,
    Learning,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewWord {
    pub surface: String,
    pub meaning: String,
    /// Progress after the sentence; above 1 when the word repeats.
    pub progress: ProgressLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvancedWord {
    pub surface: String,
    pub old_progress: ProgressLevel,
    pub new_progress: ProgressLevel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabReport {
    pub new_words: Vec<NewWord>,
    pub advanced_words: Vec<AdvancedWord>,
    pub display_lines: Vec<String>,
}

impl VocabReport {
    /// Every surface mentioned in the new/advanced lists.
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.new_words
            .iter()
            .map(|w| w.surface.as_str())
            .chain(self.advanced_words.iter().map(|w| w.surface.as_str()))
    }
}

/// One token handed to the tracker. The reading is stored on creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordOccurrence<'a> {
    pub surface: &'a str,
    pub reading: Option<&'a str>,
}

impl<'a> WordOccurrence<'a> {
    pub fn new(surface: &'a str) -> Self {
        Self { surface, reading: None }
    }

    pub fn with_reading(surface: &'a str, reading: &'a str) -> Self {
        Self {
            surface,
            reading: Some(reading),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrackingError {
    /// Meaning lookup failed. The failed words were not inserted; every other
    /// occurrence in the sentence was applied to the partial state.
    #[error("meaning lookup failed for {word:?}: {cause}")]
    LexiconFailure {
        word: String,
        failed_words: Vec<String>,
        cause: ProviderError,
        partial: Box<(VocabDatabase, VocabReport)>,
    },
}

/// `<surface>: <meaning> (Progress: <p>/5)`
pub fn format_progress_line(entry: &VocabEntry) -> String {
    format!(
        "{}: {} (Progress: {}/{})",
        entry.surface,
        entry.meaning,
        entry.progress.get(),
        MAX_PROGRESS
    )
}

pub fn word_status(db: &VocabDatabase, surface: &str) -> WordStatus {
    db.get(surface).map_or(WordStatus::Unknown, VocabEntry::status)
}

/// Tracks bare surfaces. Readings come from the lexicon's hint, or the
/// surface itself when it is already kana.
pub fn track_vocabulary<S: AsRef<str>>(
    sentence_words: &[S],
    db: &VocabDatabase,
    lexicon: &dyn Lexicon,
    now: DateTime<Utc>,
) -> Result<(VocabDatabase, VocabReport), TrackingError> {
    let occurrences: Vec<WordOccurrence<'_>> =
        sentence_words.iter().map(|w| WordOccurrence::new(w.as_ref())).collect();
    track_occurrences(&occurrences, db, lexicon, now)
}

pub fn track_occurrences(
    occurrences: &[WordOccurrence<'_>],
    db: &VocabDatabase,
    lexicon: &dyn Lexicon,
    now: DateTime<Utc>,
) -> Result<(VocabDatabase, VocabReport), TrackingError> {
    let mut next = db.clone();
    let mut new_order: Vec<String> = Vec::new();
    let mut advanced: Vec<(String, ProgressLevel)> = Vec::new();
    let mut failures: Vec<(String, ProviderError)> = Vec::new();

    for occ in occurrences {
        let surface = occ.surface;
        if let Some(entry) = next.entries.get_mut(surface) {
            let before = entry.progress;
            entry.progress = before.advanced();
            entry.exposure_count += 1;
            entry.last_seen = now;
            let existed_before = db.entries.contains_key(surface);
            if existed_before
                && entry.progress != before
                && !advanced.iter().any(|(s, _)| s == surface)
            {
                advanced.push((surface.to_owned(), before));
            }
            continue;
        }
        if failures.iter().any(|(s, _)| s == surface) {
            continue;
        }
        match lexicon.get_meaning(surface) {
            Ok(meaning) => {
                let reading = occ
                    .reading
                    .map(str::to_owned)
                    .or_else(|| lexicon.reading_hint(surface))
                    .or_else(|| KanaString::parse(surface).ok().map(KanaString::into_string))
                    .unwrap_or_default();
                next.insert(VocabEntry {
                    surface: surface.to_owned(),
                    reading,
                    meaning,
                    progress: ProgressLevel::FIRST,
                    first_seen: now,
                    last_seen: now,
                    exposure_count: 1,
                });
                new_order.push(surface.to_owned());
            }
            Err(cause) => failures.push((surface.to_owned(), cause)),
        }
    }

    let report = VocabReport {
        new_words: new_order
            .iter()
            .map(|s| {
                let e = &next.entries[s];
                NewWord {
                    surface: s.clone(),
                    meaning: e.meaning.clone(),
                    progress: e.progress,
                }
            })
            .collect(),
        advanced_words: advanced
            .into_iter()
            .map(|(s, old)| AdvancedWord {
                new_progress: next.entries[&s].progress,
                surface: s,
                old_progress: old,
            })
            .collect(),
        display_lines: next.display_lines(),
    };

    if failures.is_empty() {
        return Ok((next, report));
    }
    let failed_words = failures.iter().map(|(s, _)| s.clone()).collect();
    let (word, cause) = failures.swap_remove(0);
    Err(TrackingError::LexiconFailure {
        word,
        failed_words,
        cause,
        partial: Box::new((next, report)),
    })
}

/// Local record of what one learner session has touched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub started_at: DateTime<Utc>,
    pub inputs_processed: u64,
    pub words_introduced: Vec<String>,
    pub words_advanced: Vec<String>,
    pub words_completed: Vec<String>,
}

impl SessionRecord {
    pub fn new(session_id: impl Into<String>, started_at: DateTime<Utc>) -> Self {
        Self {
            session_id: session_id.into(),
            started_at,
            inputs_processed: 0,
            words_introduced: Vec::new(),
            words_advanced: Vec::new(),
            words_completed: Vec::new(),
        }
    }
}

fn push_unique(list: &mut Vec<String>, surface: &str) {
    if !list.iter().any(|s| s == surface) {
        list.push(surface.to_owned());
    }
}

pub fn apply_to_session(session: &SessionRecord, report: &VocabReport) -> SessionRecord {
    let mut next = session.clone();
    next.inputs_processed += 1;
    for word in &report.new_words {
        push_unique(&mut next.words_introduced, &word.surface);
        if word.progress.is_learned() {
            push_unique(&mut next.words_completed, &word.surface);
        }
    }
    for word in &report.advanced_words {
        push_unique(&mut next.words_advanced, &word.surface);
        if word.new_progress.is_learned() {
            push_unique(&mut next.words_completed, &word.surface);
        }
    }
    next
}

/// Tally of occurrences per surface in one sentence, in first-seen order.
pub fn occurrence_counts<'a>(words: impl IntoIterator<Item = &'a str>) -> Vec<(&'a str, usize)> {
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in words {
        *counts.entry(w).or_insert_with(|| {
            order.push(w);
            0
        }) += 1;
    }
    order.into_iter().map(|w| (w, counts[w])).collect()
}
