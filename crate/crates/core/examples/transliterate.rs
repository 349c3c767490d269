//! Kana to Hepburn romaji, phonemes and mora counts.
//!
//! ```text
//! cargo run --example transliterate -- すし きっぷ コーヒー しんよう
//! ```

use salad::jp_text::{kana_to_phonemes, kana_to_romaji, mora_count, KanaString};

fn main() {
    let mut words: Vec<String> = std::env::args().skip(1).collect();
    if words.is_empty() {
        words = ["わたしはすしをたべます", "きっぷ", "コーヒー", "しんよう", "ヴァイオリン", "ーあ"]
            .map(String::from)
            .to_vec();
    }
    for word in words {
        let kana = match KanaString::parse(&word) {
            Ok(k) => k,
            Err(e) => {
                println!("{word}: {e}");
                continue;
            }
        };
        match (kana_to_romaji(&kana), kana_to_phonemes(&kana), mora_count(&kana)) {
            (Ok(romaji), Ok(units), Ok(n)) => {
                let phonemes: Vec<String> = units.iter().map(|u| u.labels().join(" ")).collect();
                println!("{word}\t{romaji}\t{n} morae\t[{}]", phonemes.join(" | "));
            }
            (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => println!("{word}: {e}"),
        }
    }
}
