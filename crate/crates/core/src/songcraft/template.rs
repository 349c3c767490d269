//! Lyric template files.
//!
//! One template per UTF-8 file:
//!
//! ```text
//! # salad-template v1
//! id: t1
//! notes: 60:0.5 62:0.5 64:1.0
//! # comment lines are allowed in the header
//! ---
//! さくら{SLOT}
//! ```
//!
//! The first line is the exact version header. Header lines are
//! `key: value`; `id` is `[a-z0-9_-]+` and `notes` is a space-separated list
//! of `midi:seconds` pairs. After the `---` separator every non-blank line is
//! a lyric line of literal kana and `{SLOT}` markers. Lines are concatenated
//! without separators when the song is sung.

use std::path::Path;

use serde::Serialize;

use super::{MelodyNote, SongError};
use crate::jp_text::{mora_count, KanaString};

pub const TEMPLATE_HEADER: &str = "# salad-template v1";
const SLOT_MARKER: &str = "{SLOT}";

const BUILTIN: [&str; 3] = [
    include_str!("../../data/templates/t1.tpl"),
    include_str!("../../data/templates/t2.tpl"),
    include_str!("../../data/templates/t3.tpl"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LyricPiece {
    Text(KanaString),
    Slot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LyricLine {
    pub pieces: Vec<LyricPiece>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyricTemplate {
    template_id: String,
    lines: Vec<LyricLine>,
    melody: Vec<MelodyNote>,
    fixed_morae: usize,
}

fn invalid(msg: impl Into<String>) -> SongError {
    SongError::InvalidTemplate(msg.into())
}

fn parse_line(line: &str) -> Result<LyricLine, SongError> {
    let mut pieces = Vec::new();
    for (i, text) in line.split(SLOT_MARKER).enumerate() {
        if i > 0 {
            pieces.push(LyricPiece::Slot);
        }
        if !text.is_empty() {
            let kana = KanaString::parse(text).map_err(|e| invalid(format!("lyric {line:?}: {e}")))?;
            pieces.push(LyricPiece::Text(kana));
        }
    }
    Ok(LyricLine { pieces })
}

fn parse_notes(spec: &str) -> Result<Vec<MelodyNote>, SongError> {
    spec.split_whitespace()
        .map(|pair| {
            let (midi, secs) = pair
                .split_once(':')
                .ok_or_else(|| invalid(format!("note {pair:?} is not midi:duration")))?;
            let midi: u8 = midi.parse().map_err(|_| invalid(format!("bad pitch in {pair:?}")))?;
            let secs: f64 = secs.parse().map_err(|_| invalid(format!("bad duration in {pair:?}")))?;
            MelodyNote::new(midi, secs)
        })
        .collect()
}

impl LyricTemplate {
    pub fn parse(source: &str) -> Result<Self, SongError> {
        let mut lines = source.lines();
        if lines.next().map(str::trim_end) != Some(TEMPLATE_HEADER) {
            return Err(invalid(format!("first line must be {TEMPLATE_HEADER:?}")));
        }
        let mut id = None;
        let mut melody = None;
        let mut saw_separator = false;
        for line in lines.by_ref() {
            let line = line.trim_end();
            if line == "---" {
                saw_separator = true;
                break;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| invalid(format!("header line {line:?} is not key: value")))?;
            match key.trim() {
                "id" => id = Some(value.trim().to_owned()),
                "notes" => melody = Some(parse_notes(value)?),
                other => return Err(invalid(format!("unknown header key {other:?}"))),
            }
        }
        if !saw_separator {
            return Err(invalid("missing --- separator"));
        }
        let template_id = id.ok_or_else(|| invalid("missing id"))?;
        if template_id.is_empty()
            || !template_id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'_')
        {
            return Err(invalid(format!("id {template_id:?} must match [a-z0-9_-]+")));
        }
        let melody = melody.ok_or_else(|| invalid("missing notes"))?;
        if melody.is_empty() {
            return Err(invalid("melody has no notes"));
        }
        let lines = lines
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .map(parse_line)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(template_id, lines, melody)
    }

    pub fn new(template_id: String, lines: Vec<LyricLine>, melody: Vec<MelodyNote>) -> Result<Self, SongError> {
        let mut fixed_morae = 0;
        let mut slots = 0;
        for piece in lines.iter().flat_map(|l| &l.pieces) {
            match piece {
                LyricPiece::Text(text) => {
                    fixed_morae += mora_count(text).map_err(|e| invalid(format!("lyric {text}: {e}")))?
                }
                LyricPiece::Slot => slots += 1,
            }
        }
        if slots == 0 {
            return Err(invalid("template needs at least one {SLOT}"));
        }
        if fixed_morae + slots > melody.len() {
            return Err(invalid(format!(
                "{fixed_morae} fixed morae and {slots} slot(s) cannot fit {} notes",
                melody.len()
            )));
        }
        Ok(Self {
            template_id,
            lines,
            melody,
            fixed_morae,
        })
    }

    pub fn id(&self) -> &str {
        &self.template_id
    }

    pub fn lines(&self) -> &[LyricLine] {
        &self.lines
    }

    pub fn melody(&self) -> &[MelodyNote] {
        &self.melody
    }

    pub fn slot_count(&self) -> usize {
        self.lines
            .iter()
            .flat_map(|l| &l.pieces)
            .filter(|p| matches!(p, LyricPiece::Slot))
            .count()
    }

    pub fn fixed_morae(&self) -> usize {
        self.fixed_morae
    }

    /// Morae left over for slot words once the fixed lyric is placed.
    pub fn slot_morae(&self) -> usize {
        self.melody.len() - self.fixed_morae
    }

    pub fn total_duration(&self) -> f64 {
        self.melody.iter().map(MelodyNote::duration).sum()
    }

    pub fn summary(&self) -> TemplateSummary {
        TemplateSummary {
            template_id: self.template_id.clone(),
            slot_count: self.slot_count(),
            slot_morae: self.slot_morae(),
            note_count: self.melody.len(),
            duration_seconds: self.total_duration(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateSummary {
    pub template_id: String,
    pub slot_count: usize,
    pub slot_morae: usize,
    pub note_count: usize,
    pub duration_seconds: f64,
}

/// Templates keyed by id, in id order.
#[derive(Debug, Clone, Default)]
pub struct TemplateLibrary {
    templates: Vec<LyricTemplate>,
}

impl TemplateLibrary {
    pub fn builtin() -> Self {
        Self::from_templates(
            BUILTIN
                .iter()
                .map(|src| LyricTemplate::parse(src).expect("bundled template is valid"))
                .collect(),
        )
        .expect("bundled template ids are unique")
    }

    pub fn from_templates(mut templates: Vec<LyricTemplate>) -> Result<Self, SongError> {
        templates.sort_by(|a, b| a.template_id.cmp(&b.template_id));
        if let Some(w) = templates.windows(2).find(|w| w[0].template_id == w[1].template_id) {
            return Err(invalid(format!("duplicate template id {:?}", w[0].template_id)));
        }
        Ok(Self { templates })
    }

    /// Every `*.tpl` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, SongError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| invalid(format!("reading {}: {e}", dir.display())))?;
        let mut templates = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| invalid(e.to_string()))?.path();
            if path.extension().is_some_and(|ext| ext == "tpl") {
                let source = std::fs::read_to_string(&path)
                    .map_err(|e| invalid(format!("reading {}: {e}", path.display())))?;
                templates.push(
                    LyricTemplate::parse(&source)
                        .map_err(|e| invalid(format!("{}: {e}", path.display())))?,
                );
            }
        }
        Self::from_templates(templates)
    }

    pub fn get(&self, id: &str) -> Option<&LyricTemplate> {
        self.templates.iter().find(|t| t.template_id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LyricTemplate> {
        self.templates.iter()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}
