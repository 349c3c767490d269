//! The tracking loop on its own: feed segmented sentences, watch progress
//! climb to 5/5 and stop there.

use chrono::Utc;
use salad::providers::MapLexicon;
use salad::{format_progress_line, track_vocabulary, VocabDatabase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lexicon = MapLexicon::from_pairs([("猫", "cat"), ("が", "subject marker"), ("好き", "liked"), ("です", "is")]);
    let sentences = [
        vec!["猫", "が", "好き", "です"],
        vec!["猫", "猫"],
        vec!["猫", "です"],
        vec!["猫", "猫", "猫"],
    ];
    let mut db = VocabDatabase::new();
    for (i, sentence) in sentences.iter().enumerate() {
        let (next, report) = track_vocabulary(sentence, &db, &lexicon, Utc::now())?;
        db = next;
        println!("sentence {}: {}", i + 1, sentence.join(" "));
        for w in &report.new_words {
            println!("  new       {} ({})", w.surface, w.meaning);
        }
        for w in &report.advanced_words {
            println!("  advanced  {} {} -> {}", w.surface, w.old_progress.get(), w.new_progress.get());
        }
    }
    println!();
    for entry in db.display_order() {
        println!("{}   seen {}x", format_progress_line(entry), entry.exposure_count);
    }
    Ok(())
}
