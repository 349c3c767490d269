//! The fixture corpus behind the mock providers.
//!
//! Three UTF-8 tab-separated files, `#` starting a comment line:
//!
//! - `corpus.tsv`: `english  kanji  kana  romaji  segmentation`, where the
//!   segmentation is space-joined `surface:reading` pairs.
//! - `lexicon.tsv`: `surface  reading  meaning`. Alternative glosses are
//!   separated by `; `.
//! - `grammar_rules.tsv`: `pattern  explanation`. A pattern starting with
//!   `〜` matches tokens ending in the rest of the pattern; others match a
//!   whole token.

use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

use super::{Segment, TranslationTriple};
use crate::jp_text::KanaString;

const CORPUS_TSV: &str = include_str!("../../data/fixtures/corpus.tsv");
const LEXICON_TSV: &str = include_str!("../../data/fixtures/lexicon.tsv");
const GRAMMAR_TSV: &str = include_str!("../../data/fixtures/grammar_rules.tsv");

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconRow {
    pub surface: String,
    pub reading: KanaString,
    pub meaning: String,
}

impl LexiconRow {
    /// Lowercased glosses with any leading "to " removed.
    pub fn glosses(&self) -> impl Iterator<Item = String> + '_ {
        self.meaning.split(';').map(|g| {
            let g = g.trim().to_lowercase();
            g.strip_prefix("to ").map(str::to_owned).unwrap_or(g)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternMatch {
    Token,
    Suffix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarRule {
    pub pattern: String,
    pub explanation: String,
}

impl GrammarRule {
    pub fn match_kind(&self) -> PatternMatch {
        if self.pattern.starts_with('〜') {
            PatternMatch::Suffix
        } else {
            PatternMatch::Token
        }
    }

    pub fn matches(&self, surface: &str) -> bool {
        match self.pattern.strip_prefix('〜') {
            Some(suffix) => surface.ends_with(suffix),
            None => surface == self.pattern,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSet {
    pub corpus: Vec<TranslationTriple>,
    pub lexicon: Vec<LexiconRow>,
    pub grammar: Vec<GrammarRule>,
}

fn rows<'a>(
    file: &'static str,
    source: &'a str,
    columns: usize,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>), FixtureError>> + 'a {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .map(move |(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != columns {
                return Err(FixtureError::Parse {
                    file,
                    line: i + 1,
                    reason: format!("expected {columns} columns, found {}", cols.len()),
                });
            }
            Ok((i + 1, cols))
        })
}

fn kana(file: &'static str, line: usize, text: &str) -> Result<KanaString, FixtureError> {
    KanaString::parse(text).map_err(|e| FixtureError::Parse {
        file,
        line,
        reason: e.to_string(),
    })
}

impl FixtureSet {
    /// The fixtures compiled into the crate.
    pub fn builtin() -> &'static FixtureSet {
        static SET: LazyLock<FixtureSet> = LazyLock::new(|| {
            FixtureSet::parse(CORPUS_TSV, LEXICON_TSV, GRAMMAR_TSV)
                .expect("bundled fixtures are valid")
        });
        &SET
    }

    /// Loads `corpus.tsv`, `lexicon.tsv` and `grammar_rules.tsv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, FixtureError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| FixtureError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        Self::parse(
            &read("corpus.tsv")?,
            &read("lexicon.tsv")?,
            &read("grammar_rules.tsv")?,
        )
    }

    pub fn parse(corpus: &str, lexicon: &str, grammar: &str) -> Result<Self, FixtureError> {
        let mut set = FixtureSet::default();
        for row in rows("corpus.tsv", corpus, 5) {
            let (line, cols) = row?;
            let segmentation = cols[4]
                .split(' ')
                .map(|pair| {
                    let (surface, reading) = pair.split_once(':').ok_or(FixtureError::Parse {
                        file: "corpus.tsv",
                        line,
                        reason: format!("segment {pair:?} is not surface:reading"),
                    })?;
                    Ok(Segment {
                        surface: surface.to_owned(),
                        reading: kana("corpus.tsv", line, reading)?,
                    })
                })
                .collect::<Result<Vec<_>, FixtureError>>()?;
            let triple = TranslationTriple {
                source_en: cols[0].to_owned(),
                kanji: cols[1].to_owned(),
                kana: kana("corpus.tsv", line, cols[2])?,
                romaji: cols[3].to_owned(),
                segmentation,
            };
            triple.validate().map_err(|reason| FixtureError::Parse {
                file: "corpus.tsv",
                line,
                reason,
            })?;
            set.corpus.push(triple);
        }
        for row in rows("lexicon.tsv", lexicon, 3) {
            let (line, cols) = row?;
            set.lexicon.push(LexiconRow {
                surface: cols[0].to_owned(),
                reading: kana("lexicon.tsv", line, cols[1])?,
                meaning: cols[2].to_owned(),
            });
        }
        for row in rows("grammar_rules.tsv", grammar, 2) {
            let (line, cols) = row?;
            if cols[0].is_empty() || cols[0] == "〜" || cols[1].is_empty() {
                return Err(FixtureError::Parse {
                    file: "grammar_rules.tsv",
                    line,
                    reason: "pattern and explanation must be non-empty".into(),
                });
            }
            set.grammar.push(GrammarRule {
                pattern: cols[0].to_owned(),
                explanation: cols[1].to_owned(),
            });
        }
        Ok(set)
    }

    pub fn lexicon_row(&self, surface: &str) -> Option<&LexiconRow> {
        self.lexicon.iter().find(|r| r.surface == surface)
    }
}
