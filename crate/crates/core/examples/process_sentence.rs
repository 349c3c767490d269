//! One English phrase through the whole pipeline with the offline mocks:
//! translation, grammar notes, vocabulary update and pronunciation audio.

use chrono::Utc;
use salad::store::MemoryClips;
use salad::{process_input, LearnerInput, ProviderSet, VocabDatabase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "I eat sushi".into());
    let providers = ProviderSet::mock();
    let clips = MemoryClips::default();
    let input = LearnerInput::text(text, "example", Utc::now());

    let (db, result) = process_input(&input, &VocabDatabase::new(), &providers, &clips)?;
    println!("{}\n{}\n{}", result.triple.kanji, result.triple.kana, result.triple.romaji);
    for note in &result.grammar {
        println!("  {}: {}", note.pattern, note.explanation);
    }
    for line in &result.vocab_report.display_lines {
        println!("{line}");
    }
    if let Some(p) = &result.pronunciation {
        println!("audio {} ({:.2} s), {} clip(s) stored", p.audio_id, p.duration_seconds, clips.len());
    }
    println!("{} word(s) tracked", db.len());
    Ok(())
}
