//! SALAD: English to Japanese study aid.
//!
//! Each English phrase is translated into kanji, kana and romaji, explained,
//! voiced, and folded into a per-word progress database. Practice songs put
//! the words still being learned into melody templates.
//!
//! Every AI capability sits behind a port in [`providers`] with an offline
//! mock, so the whole crate runs without network access.

pub mod app;
pub mod audio;
pub mod config;
pub mod http;
pub mod jp_text;
pub mod pipeline;
pub mod providers;
pub mod songcraft;
pub mod store;
pub mod vocab;

pub use audio::AudioClip;
pub use jp_text::{kana_to_phonemes, kana_to_romaji, mora_count, KanaString};
pub use pipeline::{process_input, replay_corpus, LearnerInput, PipelineResult};
pub use providers::ProviderSet;
pub use songcraft::{generate_song, LyricTemplate, TemplateLibrary};
pub use store::{Store, StoreRoot};
pub use vocab::{format_progress_line, track_vocabulary, VocabDatabase, VocabEntry};
