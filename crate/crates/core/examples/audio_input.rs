//! Spoken input: decode a WAV, transcribe it with the mock recognizer and run
//! the same pipeline as for text.
//!
//! ```text
//! cargo run --example audio_input -- crates/core/data/fixtures/audio/good_morning.wav
//! ```

use chrono::Utc;
use salad::pipeline::InputPayload;
use salad::store::MemoryClips;
use salad::{process_input, AudioClip, LearnerInput, ProviderSet, VocabDatabase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/fixtures/audio/i_eat_sushi.wav").into());
    let clip = AudioClip::from_wav(&std::fs::read(&path)?)?;
    println!("{path}: {:.2} s at {} Hz", clip.duration_seconds(), clip.sample_rate());

    let input = LearnerInput {
        payload: InputPayload::Audio(clip),
        session_id: "voice".into(),
        received_at: Utc::now(),
    };
    let (_, result) = process_input(&input, &VocabDatabase::new(), &ProviderSet::mock(), &MemoryClips::default())?;
    println!("heard: {}", result.transcript);
    println!("{}", result.triple.kanji);
    for line in &result.vocab_report.display_lines {
        println!("{line}");
    }
    Ok(())
}
