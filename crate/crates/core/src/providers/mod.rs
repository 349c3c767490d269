//! Capability ports for the AI services the system leans on, plus their
//! offline mocks and hosted adapters.
//!
//! Every port is a plain synchronous trait object. [`ProviderSet`] binds one
//! implementation per port and records whether each binding is a mock or a
//! live adapter.

mod fixtures;
pub mod live;
mod mock;

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::jp_text::{KanaString, TextError};
use crate::songcraft::SongScore;

pub use fixtures::{FixtureError, FixtureSet, GrammarRule, LexiconRow, PatternMatch};
pub use mock::{
    MockGrammarian, MockLexicon, MockRecognizer, MockSingingSynth, MockSpeechSynth, MockTranslator,
    SPEECH_MORA_SECONDS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("untranslatable input: {0}")]
    UntranslatableInput(String),
    #[error("unrecognizable audio: {0}")]
    UnrecognizableAudio(String),
    #[error("unknown word {0:?}")]
    UnknownWord(String),
    #[error("score has no notes")]
    EmptyScore,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("{service} request failed: {message}")]
    Upstream { service: String, message: String },
    #[error("{service} returned a malformed response: {message}")]
    MalformedResponse { service: String, message: String },
}

impl ProviderError {
    /// True when the failure came from a hosted service rather than the input.
    pub fn is_upstream(&self) -> bool {
        matches!(self, Self::Upstream { .. } | Self::MalformedResponse { .. })
    }
}

/// One word token with its kana reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub surface: String,
    pub reading: KanaString,
}

impl Segment {
    pub fn is_punctuation(&self) -> bool {
        !self.surface.is_empty() && self.surface.chars().all(is_punctuation)
    }
}

pub fn is_punctuation(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(
            c,
            '。' | '、' | '！' | '？' | '「' | '」' | '『' | '』' | '・' | '（' | '）' | '…' | '〜'
        )
}

/// Kanji, kana and romaji renderings of one sentence plus its word split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationTriple {
    pub source_en: String,
    pub kanji: String,
    pub kana: KanaString,
    pub romaji: String,
    pub segmentation: Vec<Segment>,
}

impl TranslationTriple {
    /// Checks that the segmentation surfaces spell out the kanji sentence.
    pub fn validate(&self) -> Result<(), String> {
        let joined: String = self
            .segmentation
            .iter()
            .filter(|s| !s.is_punctuation())
            .flat_map(|s| s.surface.chars())
            .filter(|c| !is_punctuation(*c))
            .collect();
        let bare: String = self.kanji.chars().filter(|c| !is_punctuation(*c)).collect();
        if joined != bare {
            return Err(format!(
                "segmentation spells {joined:?} but sentence is {bare:?}"
            ));
        }
        if self.segmentation.iter().any(|s| s.surface.is_empty()) {
            return Err("empty segment surface".into());
        }
        Ok(())
    }

    /// Word surfaces in sentence order, punctuation tokens dropped.
    pub fn words(&self) -> impl Iterator<Item = &Segment> {
        self.segmentation.iter().filter(|s| !s.is_punctuation())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarNote {
    pub pattern: String,
    pub explanation: String,
}

pub trait Translator: Send + Sync {
    fn translate(&self, source_en: &str) -> Result<TranslationTriple, ProviderError>;
}

pub trait Grammarian: Send + Sync {
    fn explain(&self, triple: &TranslationTriple) -> Result<Vec<GrammarNote>, ProviderError>;
}

pub trait Recognizer: Send + Sync {
    fn transcribe(&self, audio: &AudioClip) -> Result<String, ProviderError>;
}

pub trait SpeechSynth: Send + Sync {
    fn speak(&self, kana: &KanaString) -> Result<AudioClip, ProviderError>;
}

pub trait SingingSynth: Send + Sync {
    fn render(&self, score: &SongScore) -> Result<AudioClip, ProviderError>;
}

pub trait Lexicon: Send + Sync {
    fn get_meaning(&self, surface: &str) -> Result<String, ProviderError>;

    /// A kana reading for `surface`, when the lexicon knows one.
    fn reading_hint(&self, _surface: &str) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingKind {
    Mock,
    Live,
}

impl fmt::Display for BindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindingKind::Mock => "mock",
            BindingKind::Live => "live",
        })
    }
}

/// A port implementation tagged with how it is bound.
pub struct Port<T: ?Sized> {
    pub kind: BindingKind,
    inner: Arc<T>,
}

impl<T: ?Sized> Port<T> {
    pub fn new(kind: BindingKind, inner: Arc<T>) -> Self {
        Self { kind, inner }
    }

    pub fn mock(inner: Arc<T>) -> Self {
        Self::new(BindingKind::Mock, inner)
    }

    pub fn live(inner: Arc<T>) -> Self {
        Self::new(BindingKind::Live, inner)
    }

    pub fn handle(&self) -> Arc<T> {
        Arc::clone(&self.inner)
    }
}

impl<T: ?Sized> Clone for Port<T> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: ?Sized> Deref for Port<T> {
    type Target = T;

    fn deref(&self) -> &T {
        &self.inner
    }
}

impl<T: ?Sized> fmt::Debug for Port<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Port({})", self.kind)
    }
}

#[derive(Debug, Clone)]
pub struct ProviderSet {
    pub translator: Port<dyn Translator>,
    pub grammarian: Port<dyn Grammarian>,
    pub recognizer: Port<dyn Recognizer>,
    pub speech_synth: Port<dyn SpeechSynth>,
    pub singing_synth: Port<dyn SingingSynth>,
    pub lexicon: Port<dyn Lexicon>,
}

/// Binding kind per port, for health reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingSummary {
    pub translator: BindingKind,
    pub grammarian: BindingKind,
    pub recognizer: BindingKind,
    pub speech_synth: BindingKind,
    pub singing_synth: BindingKind,
    pub lexicon: BindingKind,
}

impl ProviderSet {
    /// Every port bound to its offline mock over the bundled fixtures.
    pub fn mock() -> Self {
        Self::mock_with(Arc::new(FixtureSet::builtin().clone()))
    }

    pub fn mock_with(fixtures: Arc<FixtureSet>) -> Self {
        Self {
            translator: Port::mock(Arc::new(MockTranslator::new(Arc::clone(&fixtures)))),
            grammarian: Port::mock(Arc::new(MockGrammarian::new(Arc::clone(&fixtures)))),
            recognizer: Port::mock(Arc::new(MockRecognizer)),
            speech_synth: Port::mock(Arc::new(MockSpeechSynth)),
            singing_synth: Port::mock(Arc::new(MockSingingSynth)),
            lexicon: Port::mock(Arc::new(MockLexicon::new(fixtures))),
        }
    }

    pub fn bindings(&self) -> BindingSummary {
        BindingSummary {
            translator: self.translator.kind,
            grammarian: self.grammarian.kind,
            recognizer: self.recognizer.kind,
            speech_synth: self.speech_synth.kind,
            singing_synth: self.singing_synth.kind,
            lexicon: self.lexicon.kind,
        }
    }
}

/// In-memory lexicon that counts lookups per surface.
#[derive(Debug, Default)]
pub struct MapLexicon {
    meanings: HashMap<String, String>,
    readings: HashMap<String, String>,
    calls: Mutex<HashMap<String, usize>>,
}

impl MapLexicon {
    pub fn from_pairs<S: Into<String>, M: Into<String>>(pairs: impl IntoIterator<Item = (S, M)>) -> Self {
        Self {
            meanings: pairs.into_iter().map(|(s, m)| (s.into(), m.into())).collect(),
            ..Self::default()
        }
    }

    pub fn with_reading(mut self, surface: &str, reading: &str) -> Self {
        self.readings.insert(surface.to_owned(), reading.to_owned());
        self
    }

    pub fn calls(&self, surface: &str) -> usize {
        self.calls
            .lock()
            .expect("lexicon call counter poisoned")
            .get(surface)
            .copied()
            .unwrap_or(0)
    }
}

impl Lexicon for MapLexicon {
    fn get_meaning(&self, surface: &str) -> Result<String, ProviderError> {
        *self
            .calls
            .lock()
            .expect("lexicon call counter poisoned")
            .entry(surface.to_owned())
            .or_default() += 1;
        self.meanings
            .get(surface)
            .cloned()
            .ok_or_else(|| ProviderError::UnknownWord(surface.to_owned()))
    }

    fn reading_hint(&self, surface: &str) -> Option<String> {
        self.readings.get(surface).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(surface: &str, reading: &str) -> Segment {
        Segment {
            surface: surface.into(),
            reading: KanaString::parse(reading).unwrap(),
        }
    }

    #[test]
    fn triple_validation_ignores_punctuation() {
        let triple = TranslationTriple {
            source_en: "Cat.".into(),
            kanji: "猫です。".into(),
            kana: KanaString::parse("ねこです").unwrap(),
            romaji: "neko desu".into(),
            segmentation: vec![seg("猫", "ねこ"), seg("です", "です"), seg("。", "")],
        };
        assert!(triple.validate().is_ok());
        assert_eq!(triple.words().count(), 2);

        let mut bad = triple.clone();
        bad.segmentation.remove(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mock_set_reports_bindings() {
        let set = ProviderSet::mock();
        let b = set.bindings();
        assert_eq!(b.translator, BindingKind::Mock);
        assert_eq!(serde_json::to_value(&b).unwrap()["lexicon"], "mock");
    }

    #[test]
    fn map_lexicon_counts() {
        let lex = MapLexicon::from_pairs([("猫", "cat")]);
        assert_eq!(lex.get_meaning("猫").unwrap(), "cat");
        assert_eq!(lex.get_meaning("犬"), Err(ProviderError::UnknownWord("犬".into())));
        assert_eq!(lex.calls("猫"), 1);
        assert_eq!(lex.calls("犬"), 1);
    }
}
