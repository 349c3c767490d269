//! The on-disk store: atomic saves, the session log and content-addressed
//! audio. Everything lands in a temporary directory.

use chrono::Utc;
use salad::providers::MapLexicon;
use salad::store::{self, StoreRoot};
use salad::vocab::SessionRecord;
use salad::{track_vocabulary, AudioClip, VocabDatabase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("salad-store-example-{}", std::process::id()));
    let root = StoreRoot::init(&dir)?;

    let lexicon = MapLexicon::from_pairs([("水", "water"), ("です", "is")]);
    let (db, _) = track_vocabulary(&["水", "です"], &VocabDatabase::new(), &lexicon, Utc::now())?;
    store::save_db(&root, &db)?;
    println!("{}:\n{}", root.vocab_path().display(), std::fs::read_to_string(root.vocab_path())?);
    assert_eq!(store::load_db(&root)?, db);

    // a save cut short leaves the previous file intact
    let mut bigger = db.clone();
    bigger.entries.clear();
    store::save_db_interrupted(&root, &bigger, 10)?;
    println!("after an interrupted save: {} entries", store::load_db(&root)?.len());

    store::append_session(&root, &SessionRecord::new("demo", Utc::now()))?;
    println!("sessions logged: {}", store::load_sessions(&root)?.len());

    let id = store::put_audio(&root, &AudioClip::silence(2205))?;
    println!("audio {} -> {:.2} s", id, store::get_audio(&root, &id)?.duration_seconds());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
