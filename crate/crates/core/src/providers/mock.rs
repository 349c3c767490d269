//! Deterministic offline implementations of every port.

use std::collections::HashMap;
use std::sync::Arc;

use super::{
    FixtureSet, GrammarNote, Grammarian, Lexicon, ProviderError, Recognizer, Segment,
    SingingSynth, SpeechSynth, TranslationTriple, Translator,
};
use crate::audio::{push_tone, seconds_to_samples, AudioClip, SAMPLE_RATE};
use crate::jp_text::{kana_to_phonemes, kana_to_romaji, KanaString, Phoneme};
use crate::songcraft::SongScore;

/// Length of one spoken mora in the mock speech synthesizer.
pub const SPEECH_MORA_SECONDS: f64 = 0.150;

const TONE_AMPLITUDE: f64 = 0.3;
const SPEECH_BASE_HZ: f64 = 220.0;
const SPEECH_STEP_HZ: f64 = 20.0;

/// Collapses case, whitespace and trailing sentence punctuation.
fn normalize_sentence(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches(['.', '!', '?'])
        .trim()
        .to_lowercase()
}

fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase()
}

/// Exact-match lookup in the fixture corpus, falling back to word-by-word
/// lexicon lookup joined in source order.
pub struct MockTranslator {
    fixtures: Arc<FixtureSet>,
    sentences: HashMap<String, usize>,
    words: HashMap<String, usize>,
}

impl MockTranslator {
    pub fn new(fixtures: Arc<FixtureSet>) -> Self {
        let sentences = fixtures
            .corpus
            .iter()
            .enumerate()
            .map(|(i, t)| (normalize_sentence(&t.source_en), i))
            .collect();
        let mut words = HashMap::new();
        for (i, row) in fixtures.lexicon.iter().enumerate() {
            for gloss in row.glosses() {
                words.entry(gloss).or_insert(i);
            }
        }
        Self {
            fixtures,
            sentences,
            words,
        }
    }

    fn word_by_word(&self, source_en: &str) -> Result<TranslationTriple, ProviderError> {
        let mut segmentation = Vec::new();
        for raw in source_en.split_whitespace() {
            let word = normalize_word(raw);
            if word.is_empty() {
                continue;
            }
            let row = self
                .words
                .get(&word)
                .map(|&i| &self.fixtures.lexicon[i])
                .ok_or_else(|| ProviderError::UntranslatableInput(format!("unknown word {word:?}")))?;
            segmentation.push(Segment {
                surface: row.surface.clone(),
                reading: row.reading.clone(),
            });
        }
        if segmentation.is_empty() {
            return Err(ProviderError::UntranslatableInput("no words".into()));
        }
        let kana = KanaString::parse(
            &segmentation.iter().map(|s| s.reading.as_str()).collect::<String>(),
        )?;
        let romaji = segmentation
            .iter()
            .map(|s| kana_to_romaji(&s.reading))
            .collect::<Result<Vec<_>, _>>()?
            .join(" ");
        Ok(TranslationTriple {
            source_en: source_en.to_owned(),
            kanji: segmentation.iter().map(|s| s.surface.as_str()).collect(),
            kana,
            romaji,
            segmentation,
        })
    }
}

impl Translator for MockTranslator {
    fn translate(&self, source_en: &str) -> Result<TranslationTriple, ProviderError> {
        if source_en.trim().is_empty() {
            return Err(ProviderError::UntranslatableInput("empty input".into()));
        }
        match self.sentences.get(&normalize_sentence(source_en)) {
            Some(&i) => Ok(self.fixtures.corpus[i].clone()),
            None => self.word_by_word(source_en),
        }
    }
}

/// Emits one note per grammar rule that matches a token, in sentence order.
pub struct MockGrammarian {
    fixtures: Arc<FixtureSet>,
}

impl MockGrammarian {
    pub fn new(fixtures: Arc<FixtureSet>) -> Self {
        Self { fixtures }
    }
}

impl Grammarian for MockGrammarian {
    fn explain(&self, triple: &TranslationTriple) -> Result<Vec<GrammarNote>, ProviderError> {
        let mut notes: Vec<GrammarNote> = Vec::new();
        for segment in triple.words() {
            for rule in &self.fixtures.grammar {
                if rule.matches(&segment.surface) && !notes.iter().any(|n| n.pattern == rule.pattern) {
                    notes.push(GrammarNote {
                        pattern: rule.pattern.clone(),
                        explanation: rule.explanation.clone(),
                    });
                }
            }
        }
        Ok(notes)
    }
}

/// Returns the transcript embedded in a fixture clip's metadata chunk.
pub struct MockRecognizer;

impl Recognizer for MockRecognizer {
    fn transcribe(&self, audio: &AudioClip) -> Result<String, ProviderError> {
        if audio.is_empty() {
            return Err(ProviderError::UnrecognizableAudio("zero-length audio".into()));
        }
        match audio.annotation().map(str::trim) {
            Some(text) if !text.is_empty() => Ok(text.to_owned()),
            _ => Err(ProviderError::UnrecognizableAudio(
                "no embedded transcript".into(),
            )),
        }
    }
}

/// One 150 ms sine tone per mora, pitched by the mora's vowel.
pub struct MockSpeechSynth;

impl MockSpeechSynth {
    /// Sample index where mora `i` starts: `round(i * 0.150 * 22050)`, half up.
    pub fn mora_boundary(i: usize) -> usize {
        // 0.150 s * 22050 Hz = 6615 / 2 samples
        (i * 6615).div_ceil(2)
    }

    /// Tone frequency for one mora. ん sits one step above お; っ is silent.
    pub fn mora_frequency(symbols: &[Phoneme]) -> f64 {
        match symbols.last() {
            Some(Phoneme::Closure) | None => 0.0,
            Some(Phoneme::MoraicN) => SPEECH_BASE_HZ + SPEECH_STEP_HZ * 5.0,
            Some(p) => SPEECH_BASE_HZ + SPEECH_STEP_HZ * p.vowel_index().unwrap_or(0) as f64,
        }
    }
}

impl SpeechSynth for MockSpeechSynth {
    fn speak(&self, kana: &KanaString) -> Result<AudioClip, ProviderError> {
        if kana.is_empty() {
            return Err(ProviderError::EmptyInput("kana"));
        }
        let units = kana_to_phonemes(kana)?;
        let mut samples = Vec::with_capacity(Self::mora_boundary(units.len()));
        for (i, unit) in units.iter().enumerate() {
            let count = Self::mora_boundary(i + 1) - Self::mora_boundary(i);
            push_tone(&mut samples, Self::mora_frequency(&unit.symbols), count, TONE_AMPLITUDE);
        }
        Ok(AudioClip::new(samples))
    }
}

/// One equal-tempered tone per note (A4 = 440 Hz at MIDI 69).
pub struct MockSingingSynth;

impl MockSingingSynth {
    pub fn midi_frequency(midi: u8) -> f64 {
        440.0 * 2f64.powf((f64::from(midi) - 69.0) / 12.0)
    }
}

impl SingingSynth for MockSingingSynth {
    fn render(&self, score: &SongScore) -> Result<AudioClip, ProviderError> {
        if score.notes.is_empty() {
            return Err(ProviderError::EmptyScore);
        }
        let total: f64 = score.notes.iter().map(|n| n.note.duration()).sum();
        let mut samples = Vec::with_capacity((total * f64::from(SAMPLE_RATE)) as usize + 1);
        let mut elapsed = 0.0;
        let mut start = 0;
        for scored in &score.notes {
            elapsed += scored.note.duration();
            let end = seconds_to_samples(elapsed);
            push_tone(
                &mut samples,
                Self::midi_frequency(scored.note.midi_pitch()),
                end - start,
                TONE_AMPLITUDE,
            );
            start = end;
        }
        Ok(AudioClip::new(samples))
    }
}

/// Looks glosses up in the fixture lexicon.
pub struct MockLexicon {
    fixtures: Arc<FixtureSet>,
    index: HashMap<String, usize>,
}

impl MockLexicon {
    pub fn new(fixtures: Arc<FixtureSet>) -> Self {
        let index = fixtures
            .lexicon
            .iter()
            .enumerate()
            .map(|(i, r)| (r.surface.clone(), i))
            .collect();
        Self { fixtures, index }
    }
}

impl Lexicon for MockLexicon {
    fn get_meaning(&self, surface: &str) -> Result<String, ProviderError> {
        self.index
            .get(surface)
            .map(|&i| self.fixtures.lexicon[i].meaning.clone())
            .ok_or_else(|| ProviderError::UnknownWord(surface.to_owned()))
    }

    fn reading_hint(&self, surface: &str) -> Option<String> {
        self.index
            .get(surface)
            .map(|&i| self.fixtures.lexicon[i].reading.as_str().to_owned())
    }
}
