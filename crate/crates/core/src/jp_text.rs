//! Table-driven kana utilities: romaji transliteration, phoneme
//! decomposition and mora counting.
//!
//! The conversion table ships as `data/kana_table.tsv` (one
//! `kana<TAB>romaji<TAB>phonemes` row per entry). Katakana is folded to
//! hiragana before lookup, two-character rows (digraphs such as きゃ) take
//! precedence over single characters, and three rules live in code rather
//! than in rows:
//!
//! - `っ` is its own mora (`cl`); in romaji it doubles the first consonant of
//!   the following mora (`ch` becomes `tch`), or renders as `'` when there is
//!   nothing to double.
//! - `ー` is its own mora repeating the previous vowel.
//! - `ん` renders as `n'` before a vowel or `y`.
//!
//! Transliteration is mora-literal: particle readings (は as *wa*) are not
//! applied.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The conversion table bundled with the crate.
pub const KANA_TABLE_TSV: &str = include_str!("../data/kana_table.tsv");

/// Table format version this build understands.
pub const KANA_TABLE_VERSION: u32 = 1;

const SOKUON: char = 'っ';
const LONG_VOWEL: char = 'ー';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("character {ch:?} at position {position} is not kana")]
    NotKana { position: usize, ch: char },
    #[error("unmappable code point at position {position}")]
    UnmappableCodePoint { position: usize },
    #[error("kana table line {line}: {reason}")]
    Table { line: usize, reason: String },
}

/// A string made only of hiragana, katakana, sokuon and the long-vowel mark.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KanaString(String);

impl KanaString {
    pub fn parse(text: &str) -> Result<Self, TextError> {
        if let Some((position, ch)) = text.chars().enumerate().find(|(_, c)| !is_kana_char(*c)) {
            return Err(TextError::NotKana { position, ch });
        }
        Ok(Self(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl FromStr for KanaString {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for KanaString {
    type Error = TextError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)?;
        Ok(Self(value))
    }
}

impl From<KanaString> for String {
    fn from(value: KanaString) -> Self {
        value.0
    }
}

impl fmt::Display for KanaString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for KanaString {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// True for code points in the hiragana and katakana blocks.
pub fn is_kana_char(c: char) -> bool {
    matches!(c, '\u{3041}'..='\u{309F}' | '\u{30A0}'..='\u{30FF}')
}

/// Folds a katakana code point onto its hiragana counterpart; everything
/// else passes through.
pub fn fold_katakana(c: char) -> char {
    match c {
        '\u{30A1}'..='\u{30F6}' => char::from_u32(c as u32 - 0x60).unwrap_or(c),
        _ => c,
    }
}

/// Closed phoneme alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phoneme {
    A,
    I,
    U,
    E,
    O,
    K,
    G,
    S,
    Sh,
    Z,
    J,
    T,
    Ch,
    Ts,
    D,
    N,
    H,
    F,
    B,
    P,
    M,
    Y,
    R,
    W,
    V,
    /// Moraic nasal ん.
    MoraicN,
    /// Geminate closure っ.
    Closure,
}

impl Phoneme {
    pub const ALL: [Phoneme; 27] = [
        Phoneme::A,
        Phoneme::I,
        Phoneme::U,
        Phoneme::E,
        Phoneme::O,
        Phoneme::K,
        Phoneme::G,
        Phoneme::S,
        Phoneme::Sh,
        Phoneme::Z,
        Phoneme::J,
        Phoneme::T,
        Phoneme::Ch,
        Phoneme::Ts,
        Phoneme::D,
        Phoneme::N,
        Phoneme::H,
        Phoneme::F,
        Phoneme::B,
        Phoneme::P,
        Phoneme::M,
        Phoneme::Y,
        Phoneme::R,
        Phoneme::W,
        Phoneme::V,
        Phoneme::MoraicN,
        Phoneme::Closure,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phoneme::A => "a",
            Phoneme::I => "i",
            Phoneme::U => "u",
            Phoneme::E => "e",
            Phoneme::O => "o",
            Phoneme::K => "k",
            Phoneme::G => "g",
            Phoneme::S => "s",
            Phoneme::Sh => "sh",
            Phoneme::Z => "z",
            Phoneme::J => "j",
            Phoneme::T => "t",
            Phoneme::Ch => "ch",
            Phoneme::Ts => "ts",
            Phoneme::D => "d",
            Phoneme::N => "n",
            Phoneme::H => "h",
            Phoneme::F => "f",
            Phoneme::B => "b",
            Phoneme::P => "p",
            Phoneme::M => "m",
            Phoneme::Y => "y",
            Phoneme::R => "r",
            Phoneme::W => "w",
            Phoneme::V => "v",
            Phoneme::MoraicN => "N",
            Phoneme::Closure => "cl",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == label)
    }

    /// Position in a-i-u-e-o order, `None` for consonants and special morae.
    pub fn vowel_index(self) -> Option<usize> {
        match self {
            Phoneme::A => Some(0),
            Phoneme::I => Some(1),
            Phoneme::U => Some(2),
            Phoneme::E => Some(3),
            Phoneme::O => Some(4),
            _ => None,
        }
    }

    pub fn is_vowel(self) -> bool {
        self.vowel_index().is_some()
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Phoneme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Phoneme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        Phoneme::from_label(&label)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown phoneme {label:?}")))
    }
}

/// The phonemes of one mora.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeUnit {
    pub symbols: Vec<Phoneme>,
    pub mora_index: usize,
}

impl PhonemeUnit {
    /// Labels joined by spaces, e.g. `k y a`.
    pub fn labels(&self) -> Vec<&'static str> {
        self.symbols.iter().map(|p| p.label()).collect()
    }

    /// The vowel carried by this mora, if any.
    pub fn vowel(&self) -> Option<Phoneme> {
        self.symbols.last().copied().filter(|p| p.is_vowel())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub kana: String,
    pub romaji: String,
    pub phonemes: Vec<Phoneme>,
}

#[derive(Debug, Clone)]
enum Mora<'t> {
    Row(&'t TableRow),
    Sokuon,
    Long(Phoneme),
}

impl Mora<'_> {
    fn vowel(&self) -> Option<Phoneme> {
        match self {
            Mora::Row(row) => row.phonemes.last().copied().filter(|p| p.is_vowel()),
            Mora::Long(v) => Some(*v),
            Mora::Sokuon => None,
        }
    }
}

/// Parsed kana conversion table.
#[derive(Debug, Clone)]
pub struct KanaTable {
    version: u32,
    rows: Vec<TableRow>,
    index: HashMap<String, usize>,
}

impl KanaTable {
    /// The table compiled into the crate.
    pub fn builtin() -> &'static KanaTable {
        static TABLE: LazyLock<KanaTable> = LazyLock::new(|| {
            KanaTable::parse(KANA_TABLE_TSV).expect("bundled kana table is valid")
        });
        &TABLE
    }

    pub fn parse(source: &str) -> Result<Self, TextError> {
        let mut version = None;
        let mut rows = Vec::new();
        let mut index = HashMap::new();
        for (n, raw) in source.lines().enumerate() {
            let line = n + 1;
            let err = |reason: String| TextError::Table { line, reason };
            if let Some(comment) = raw.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().parse::<u32>().map_err(|e| err(e.to_string()))?);
                }
                continue;
            }
            if raw.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            let [kana, romaji, phonemes] = cols[..] else {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            };
            let kana_chars: Vec<char> = kana.chars().collect();
            if kana_chars.is_empty()
                || kana_chars.len() > 2
                || kana_chars.iter().any(|c| !('\u{3041}'..='\u{309F}').contains(c))
            {
                return Err(err(format!("kana column {kana:?} must be 1-2 hiragana")));
            }
            if kana_chars.contains(&SOKUON) || kana_chars.contains(&LONG_VOWEL) {
                return Err(err("sokuon and long-vowel are rules, not rows".into()));
            }
            if romaji.is_empty() || !romaji.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(err(format!("romaji {romaji:?} must be lowercase ascii")));
            }
            let phonemes = phonemes
                .split(' ')
                .map(|label| {
                    Phoneme::from_label(label)
                        .ok_or_else(|| err(format!("unknown phoneme {label:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if index.insert(kana.to_owned(), rows.len()).is_some() {
                return Err(err(format!("duplicate row for {kana:?}")));
            }
            rows.push(TableRow {
                kana: kana.to_owned(),
                romaji: romaji.to_owned(),
                phonemes,
            });
        }
        match version {
            Some(KANA_TABLE_VERSION) => Ok(Self { version: KANA_TABLE_VERSION, rows, index }),
            Some(other) => Err(TextError::Table {
                line: 0,
                reason: format!("unsupported table version {other}"),
            }),
            None => Err(TextError::Table {
                line: 0,
                reason: "missing version header".into(),
            }),
        }
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn lookup(&self, kana: &str) -> Option<&TableRow> {
        self.index.get(kana).map(|&i| &self.rows[i])
    }

    fn segment(&self, kana: &KanaString) -> Result<Vec<Mora<'_>>, TextError> {
        let chars: Vec<char> = kana.as_str().chars().map(fold_katakana).collect();
        let mut morae: Vec<Mora<'_>> = Vec::with_capacity(chars.len());
        let mut i = 0;
        let mut key = String::with_capacity(8);
        while i < chars.len() {
            match chars[i] {
                SOKUON => {
                    morae.push(Mora::Sokuon);
                    i += 1;
                    continue;
                }
                LONG_VOWEL => {
                    let vowel = morae
                        .last()
                        .and_then(Mora::vowel)
                        .ok_or(TextError::UnmappableCodePoint { position: i })?;
                    morae.push(Mora::Long(vowel));
                    i += 1;
                    continue;
                }
                _ => {}
            }
            if let Some(&next) = chars.get(i + 1) {
                key.clear();
                key.push(chars[i]);
                key.push(next);
                if let Some(row) = self.lookup(&key) {
                    morae.push(Mora::Row(row));
                    i += 2;
                    continue;
                }
            }
            key.clear();
            key.push(chars[i]);
            let row = self
                .lookup(&key)
                .ok_or(TextError::UnmappableCodePoint { position: i })?;
            morae.push(Mora::Row(row));
            i += 1;
        }
        Ok(morae)
    }

    pub fn romaji(&self, kana: &KanaString) -> Result<String, TextError> {
        let morae = self.segment(kana)?;
        let mut out = String::with_capacity(morae.len() * 3);
        for (i, mora) in morae.iter().enumerate() {
            let next = morae.get(i + 1);
            match mora {
                Mora::Row(row) => {
                    out.push_str(&row.romaji);
                    if row.phonemes == [Phoneme::MoraicN] {
                        if let Some(Mora::Row(next)) = next {
                            if next.romaji.starts_with(['a', 'i', 'u', 'e', 'o', 'y']) {
                                out.push('\'');
                            }
                        }
                    }
                }
                Mora::Sokuon => match next {
                    Some(Mora::Row(next)) if next.phonemes != [Phoneme::MoraicN] => {
                        if next.romaji.starts_with("ch") {
                            out.push('t');
                        } else {
                            match next.romaji.chars().next() {
                                Some(c) if !matches!(c, 'a' | 'i' | 'u' | 'e' | 'o') => out.push(c),
                                _ => out.push('\''),
                            }
                        }
                    }
                    _ => out.push('\''),
                },
                Mora::Long(vowel) => out.push_str(vowel.label()),
            }
        }
        Ok(out)
    }

    pub fn phonemes(&self, kana: &KanaString) -> Result<Vec<PhonemeUnit>, TextError> {
        Ok(self
            .segment(kana)?
            .into_iter()
            .enumerate()
            .map(|(mora_index, mora)| PhonemeUnit {
                symbols: match mora {
                    Mora::Row(row) => row.phonemes.clone(),
                    Mora::Sokuon => vec![Phoneme::Closure],
                    Mora::Long(v) => vec![v],
                },
                mora_index,
            })
            .collect())
    }

    pub fn mora_count(&self, kana: &KanaString) -> Result<usize, TextError> {
        Ok(self.segment(kana)?.len())
    }
}

/// Hepburn-style romaji using the bundled table.
pub fn kana_to_romaji(kana: &KanaString) -> Result<String, TextError> {
    KanaTable::builtin().romaji(kana)
}

/// One phoneme unit per mora using the bundled table.
pub fn kana_to_phonemes(kana: &KanaString) -> Result<Vec<PhonemeUnit>, TextError> {
    KanaTable::builtin().phonemes(kana)
}

pub fn mora_count(kana: &KanaString) -> Result<usize, TextError> {
    KanaTable::builtin().mora_count(kana)
}
