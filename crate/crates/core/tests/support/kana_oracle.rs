//! A second, independent kana converter used as a test oracle.
//!
//! It shares no code or data with the library: the syllabary is built here
//! from the gojuon grid plus a short list of exceptions, and phonemes are
//! derived by splitting each romaji syllable into onset, glide and vowel.

use std::collections::HashMap;

const VOWELS: [&str; 5] = ["a", "i", "u", "e", "o"];

/// Conventions for extended katakana-style digraphs.
const EXTENDED: &[(&str, &str)] = &[
    ("しぇ", "she"),
    ("じぇ", "je"),
    ("ちぇ", "che"),
    ("てぃ", "ti"),
    ("でぃ", "di"),
    ("とぅ", "tu"),
    ("どぅ", "du"),
    ("ふぁ", "fa"),
    ("ふぃ", "fi"),
    ("ふぇ", "fe"),
    ("ふぉ", "fo"),
    ("ふゅ", "fyu"),
    ("ゔぁ", "va"),
    ("ゔぃ", "vi"),
    ("ゔぇ", "ve"),
    ("ゔぉ", "vo"),
    ("ゔゅ", "vyu"),
    ("うぃ", "wi"),
    ("うぇ", "we"),
    ("うぉ", "wo"),
    ("いぇ", "ye"),
    ("つぁ", "tsa"),
    ("つぃ", "tsi"),
    ("つぇ", "tse"),
    ("つぉ", "tso"),
    ("てゅ", "tyu"),
    ("でゅ", "dyu"),
    ("くぁ", "kwa"),
    ("ぐぁ", "gwa"),
];

/// Historical kana whose sound is a bare vowel.
const BARE_VOWEL: &[(&str, &str)] = &[("を", "o"), ("ゐ", "i"), ("ゑ", "e")];

const ONSETS: [&str; 20] = [
    "sh", "ch", "ts", "k", "g", "s", "z", "j", "t", "d", "n", "h", "f", "b", "p", "m", "y", "r", "w", "v",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Syllable { romaji: String, phonemes: Vec<String> },
    Sokuon,
    Long(String),
}

impl Token {
    fn vowel(&self) -> Option<&str> {
        match self {
            Token::Syllable { phonemes, .. } => phonemes
                .last()
                .map(String::as_str)
                .filter(|p| VOWELS.contains(p)),
            Token::Long(v) => Some(v),
            Token::Sokuon => None,
        }
    }

    fn is_moraic_n(&self) -> bool {
        matches!(self, Token::Syllable { phonemes, .. } if phonemes == &["N"])
    }
}

pub struct KanaOracle {
    syllables: HashMap<String, String>,
}

fn split_phonemes(kana: &str, romaji: &str) -> Vec<String> {
    if let Some((_, v)) = BARE_VOWEL.iter().find(|(k, _)| *k == kana) {
        return vec![(*v).to_owned()];
    }
    if kana == "ん" {
        return vec!["N".into()];
    }
    let mut rest = romaji;
    let mut out = Vec::new();
    if let Some(onset) = ONSETS.iter().find(|o| rest.starts_with(*o) && rest.len() > o.len()) {
        out.push((*onset).to_owned());
        rest = &rest[onset.len()..];
    }
    if let Some(glide) = ["y", "w"].iter().find(|g| rest.starts_with(*g) && rest.len() > 1) {
        out.push((*glide).to_owned());
        rest = &rest[1..];
    }
    assert!(VOWELS.contains(&rest), "oracle cannot split {kana} = {romaji}");
    out.push(rest.to_owned());
    out
}

impl KanaOracle {
    pub fn new() -> Self {
        let mut s: HashMap<String, String> = HashMap::new();
        fn put(s: &mut HashMap<String, String>, k: &str, r: &str) {
            assert!(s.insert(k.to_owned(), r.to_owned()).is_none(), "oracle duplicate {k}");
        }
        let grid: [(&str, &str); 14] = [
            ("あいうえお", ""),
            ("かきくけこ", "k"),
            ("がぎぐげご", "g"),
            ("さしすせそ", "s"),
            ("ざじずぜぞ", "z"),
            ("たちつてと", "t"),
            ("だぢづでど", "d"),
            ("なにぬねの", "n"),
            ("はひふへほ", "h"),
            ("ばびぶべぼ", "b"),
            ("ぱぴぷぺぽ", "p"),
            ("まみむめも", "m"),
            ("らりるれろ", "r"),
            ("ぁぃぅぇぉ", ""),
        ];
        let irregular: HashMap<char, &str> = [
            ('し', "shi"),
            ('じ', "ji"),
            ('ち', "chi"),
            ('つ', "tsu"),
            ('ぢ', "ji"),
            ('づ', "zu"),
            ('ふ', "fu"),
        ]
        .into_iter()
        .collect();
        for (row, consonant) in grid {
            for (ch, vowel) in row.chars().zip(VOWELS) {
                let romaji = irregular
                    .get(&ch)
                    .map(|r| (*r).to_owned())
                    .unwrap_or_else(|| format!("{consonant}{vowel}"));
                put(&mut s, &ch.to_string(), &romaji);
            }
        }
        for (k, r) in [
            ("や", "ya"),
            ("ゆ", "yu"),
            ("よ", "yo"),
            ("ゃ", "ya"),
            ("ゅ", "yu"),
            ("ょ", "yo"),
            ("わ", "wa"),
            ("ゎ", "wa"),
            ("ゐ", "wi"),
            ("ゑ", "we"),
            ("を", "wo"),
            ("ん", "n"),
            ("ゔ", "vu"),
            ("ゕ", "ka"),
            ("ゖ", "ke"),
        ] {
            put(&mut s, k, r);
        }
        // yoon: i-column kana + small ya/yu/yo
        for stem_kana in "きぎしじちぢにひびぴみり".chars() {
            let stem_romaji = s[&stem_kana.to_string()].clone();
            let stem = stem_romaji.strip_suffix('i').expect("i column");
            for (small, v) in [('ゃ', "a"), ('ゅ', "u"), ('ょ', "o")] {
                let romaji = if stem == "sh" || stem == "ch" || stem == "j" {
                    format!("{stem}{v}")
                } else {
                    format!("{stem}y{v}")
                };
                put(&mut s, &format!("{stem_kana}{small}"), &romaji);
            }
        }
        for (k, r) in EXTENDED {
            put(&mut s, k, r);
        }
        Self { syllables: s }
    }

    /// Every single- and two-character key this oracle knows.
    pub fn keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.syllables.keys().cloned().collect();
        keys.sort();
        keys
    }

    fn fold(c: char) -> char {
        match c {
            'ァ'..='ヶ' => char::from_u32(c as u32 - 0x60).expect("hiragana partner"),
            _ => c,
        }
    }

    fn tokenize(&self, text: &str) -> Option<Vec<Token>> {
        let chars: Vec<char> = text.chars().map(Self::fold).collect();
        let mut tokens: Vec<Token> = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == 'っ' {
                tokens.push(Token::Sokuon);
                i += 1;
                continue;
            }
            if c == 'ー' {
                let v = tokens.last()?.vowel()?.to_owned();
                tokens.push(Token::Long(v));
                i += 1;
                continue;
            }
            let pair: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let (key, width) = if pair.chars().count() == 2 && self.syllables.contains_key(&pair) {
                (pair, 2)
            } else {
                (c.to_string(), 1)
            };
            let romaji = self.syllables.get(&key)?.clone();
            tokens.push(Token::Syllable {
                phonemes: split_phonemes(&key, &romaji),
                romaji,
            });
            i += width;
        }
        Some(tokens)
    }

    pub fn romaji(&self, text: &str) -> Option<String> {
        let tokens = self.tokenize(text)?;
        let mut out = String::new();
        for (i, t) in tokens.iter().enumerate() {
            let next = tokens.get(i + 1);
            match t {
                Token::Syllable { romaji, .. } => {
                    out += romaji;
                    let vowel_or_y = |n: &Token| match n {
                        Token::Syllable { romaji, .. } => {
                            VOWELS.iter().any(|v| romaji.starts_with(v)) || romaji.starts_with('y')
                        }
                        _ => false,
                    };
                    if t.is_moraic_n() && next.is_some_and(vowel_or_y) {
                        out += "'";
                    }
                }
                Token::Sokuon => {
                    let doubled = match next {
                        Some(n @ Token::Syllable { romaji, .. }) if !n.is_moraic_n() => {
                            if romaji.starts_with("ch") {
                                Some("t".to_owned())
                            } else {
                                romaji
                                    .chars()
                                    .next()
                                    .filter(|c| !"aiueo".contains(*c))
                                    .map(String::from)
                            }
                        }
                        _ => None,
                    };
                    out += doubled.as_deref().unwrap_or("'");
                }
                Token::Long(v) => out += v,
            }
        }
        Some(out)
    }

    /// Phoneme labels per mora.
    pub fn phonemes(&self, text: &str) -> Option<Vec<Vec<String>>> {
        Some(
            self.tokenize(text)?
                .into_iter()
                .map(|t| match t {
                    Token::Syllable { phonemes, .. } => phonemes,
                    Token::Sokuon => vec!["cl".to_owned()],
                    Token::Long(v) => vec![v],
                })
                .collect(),
        )
    }
}
