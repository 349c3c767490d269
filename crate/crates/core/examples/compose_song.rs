//! Fill a lyric template with words still being learned, align the lyric to
//! the melody and render it with the mock singing synthesizer.

use chrono::Utc;
use salad::providers::MapLexicon;
use salad::songcraft::generate_song;
use salad::store::MemoryClips;
use salad::vocab::WordOccurrence;
use salad::{ProviderSet, TemplateLibrary, VocabDatabase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lexicon = MapLexicon::from_pairs([("猫", "cat"), ("桜", "cherry blossom"), ("切符", "ticket")])
        .with_reading("猫", "ねこ")
        .with_reading("桜", "さくら")
        .with_reading("切符", "きっぷ");
    let words: Vec<WordOccurrence> = ["猫", "桜", "切符"].into_iter().map(WordOccurrence::new).collect();
    let (db, _) = salad::vocab::track_occurrences(&words, &VocabDatabase::new(), &lexicon, Utc::now())?;

    let providers = ProviderSet::mock();
    let clips = MemoryClips::default();
    for template in TemplateLibrary::builtin().iter() {
        match generate_song(&db, template, &providers, &clips) {
            Ok(song) => {
                println!("{}: {}", template.id(), song.score.lyric_text);
                println!("  slots {:?}, {} notes, {:.2} s", song.score.slot_words, song.score.notes.len(), song.duration_seconds);
                for n in song.score.notes.iter().take(4) {
                    println!("    midi {:>3} {:.2} s {}", n.note.midi_pitch(), n.note.duration(), n.phonemes.labels().join(" "));
                }
            }
            Err(e) => println!("{}: {e}", template.id()),
        }
    }
    Ok(())
}
