//! Binding hosted services from a config file. Nothing is contacted unless
//! you pass a config that marks ports as live and export the key variable.
//!
//! ```text
//! OPENAI_API_KEY=... cargo run --example live_providers -- salad.conf "I drink tea"
//! ```

use salad::config::ServiceConfig;

const SAMPLE: &str = "\
provider.translator = live
provider.grammarian = live
provider.lexicon = live
live.llm.url = https://api.openai.com/v1/chat/completions
live.llm.key_env = OPENAI_API_KEY
live.llm.model = gpt-4o-mini
live.retries = 2
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        let config = ServiceConfig::parse(SAMPLE)?;
        println!("sample config:\n\n{SAMPLE}");
        match config.build_providers() {
            Ok(p) => println!("bindings: {:?}", p.bindings()),
            Err(e) => println!("not binding: {e}"),
        }
        return Ok(());
    };
    let config = ServiceConfig::load(path.as_ref())?;
    let providers = config.build_providers()?;
    println!("bindings: {:?}", providers.bindings());
    let text = args.next().unwrap_or_else(|| "I eat sushi".into());
    let triple = providers.translator.handle().translate(&text)?;
    println!("{}\n{}\n{}", triple.kanji, triple.kana, triple.romaji);
    Ok(())
}
