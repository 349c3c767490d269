use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use salad::app::{App, AppError, VocabFilter};
use salad::config::ServiceConfig;
use salad::http::{self, RouterOptions};
use salad::pipeline::{InputPayload, PipelineResult};
use salad::{StoreRoot, TemplateLibrary};

/// Learn Japanese vocabulary from English phrases and practice songs.
#[derive(Parser)]
#[command(name = "salad", version)]
struct Cli {
    /// Service config file (flat key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory; overrides the config file
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Directory of *.tpl lyric templates; overrides the config file
    #[arg(long, global = true)]
    templates: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate one phrase and track its words
    Process(ProcessArgs),
    /// Show tracked vocabulary
    Vocab {
        #[command(subcommand)]
        command: VocabCommand,
    },
    /// Generate a practice song from words still being learned
    Song {
        #[arg(long)]
        template: String,
        /// Where to write the WAV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List lyric templates
    Templates,
    /// Run the HTTP service until interrupted
    Serve {
        /// Listen address; overrides the config file
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
    },
    /// Process every line of a text file in order
    Replay {
        inputs: PathBuf,
        #[arg(long)]
        session: Option<String>,
    },
}

#[derive(Args)]
struct ProcessArgs {
    /// English text
    #[arg(required_unless_present = "audio", conflicts_with = "audio")]
    text: Option<String>,
    /// Spoken input as a 22050 Hz mono PCM16 WAV
    #[arg(long)]
    audio: Option<PathBuf>,
    #[arg(long)]
    session: Option<String>,
    /// Print the full result as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum VocabCommand {
    List {
        #[arg(long, conflicts_with = "learned")]
        learning: bool,
        #[arg(long)]
        learned: bool,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<ServiceConfig> {
    let mut config = match &cli.config {
        Some(path) => ServiceConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ServiceConfig::default(),
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(dir) = &cli.templates {
        config.template_dir = Some(dir.clone());
    }
    Ok(config)
}

fn open_app(config: &ServiceConfig) -> anyhow::Result<App> {
    let providers = config.build_providers()?;
    let templates = match &config.template_dir {
        Some(dir) => TemplateLibrary::load_dir(dir)?,
        None => TemplateLibrary::builtin(),
    };
    let root = StoreRoot::init(&config.data_dir)?;
    Ok(App::open(root, providers, templates)?)
}

fn print_result(r: &PipelineResult) {
    println!("{}", r.triple.kanji);
    println!("{}", r.triple.kana);
    println!("{}", r.triple.romaji);
    if !r.grammar.is_empty() {
        println!();
        println!("Grammar:");
        for note in &r.grammar {
            println!("  {}: {}", note.pattern, note.explanation);
        }
    }
    println!();
    for line in &r.vocab_report.display_lines {
        println!("{line}");
    }
    for d in &r.degraded {
        eprintln!("warning: {} stage skipped: {}", d.stage, d.message);
    }
}

enum Failure {
    App(AppError),
    Other(anyhow::Error),
}

impl From<AppError> for Failure {
    fn from(e: AppError) -> Self {
        Self::App(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<AppError>() {
            Ok(app) => Self::App(app),
            Err(e) => Self::Other(e),
        }
    }
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Process(args) => {
            let app = open_app(&config)?;
            let payload = match (&args.text, &args.audio) {
                (_, Some(path)) => {
                    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                    InputPayload::Audio(App::decode_upload(&bytes)?)
                }
                (Some(text), None) => InputPayload::Text(text.clone()),
                (None, None) => unreachable!("clap requires text or --audio"),
            };
            let result = app.process(payload, args.session, chrono::Utc::now())?;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
            } else {
                print_result(&result);
            }
        }
        Command::Vocab {
            command: VocabCommand::List { learning, learned },
        } => {
            let filter = match (learning, learned) {
                (true, _) => VocabFilter::Learning,
                (_, true) => VocabFilter::Learned,
                _ => VocabFilter::All,
            };
            for line in open_app(&config)?.vocabulary(filter).display_lines() {
                println!("{line}");
            }
        }
        Command::Song { template, out } => {
            let app = open_app(&config)?;
            let song = app.song(&template)?;
            if let Some(out) = out {
                let bytes = app.audio(song.song_id.as_str())?;
                std::fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
            }
            println!("song_id: {}", song.song_id);
            println!("duration: {:.3} s", song.duration_seconds);
            println!("slot words: {}", song.slot_words.join(", "));
            if song.fallback_learned {
                println!("(every word is learned; reusing learned words)");
            }
        }
        Command::Templates => {
            for t in open_app(&config)?.templates() {
                println!(
                    "{}\t{} slot(s)\t{} morae for words\t{:.2} s",
                    t.template_id, t.slot_count, t.slot_morae, t.duration_seconds
                );
            }
        }
        Command::Serve { listen } => {
            let app = Arc::new(open_app(&config)?);
            let address = listen.unwrap_or(config.listen_address);
            let options = RouterOptions {
                max_concurrent_requests: config.max_concurrent_requests,
                cors_origin: Some(config.cors_origin.clone()).filter(|o| !o.is_empty()),
                static_dir: config.static_dir.clone(),
            };
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(address)
                    .await
                    .with_context(|| format!("binding {address}"))?;
                tracing::info!(%address, data_dir = %config.data_dir.display(), "listening");
                http::serve(listener, http::router(app, &options)).await.context("serving")
            })?;
        }
        Command::Replay { inputs, session } => {
            let app = open_app(&config)?;
            let lines = read_lines(&inputs)?;
            let results = app.replay(&lines, session, chrono::Utc::now())?;
            for (i, r) in results.iter().enumerate() {
                println!("{}\t{}\t{}", i + 1, r.transcript, r.triple.kanji);
            }
            let db = app.vocabulary(VocabFilter::All);
            println!();
            println!(
                "{} input(s); {} word(s) learning, {} learned",
                results.len(),
                db.counts.learning,
                db.counts.learned
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("SALAD_LOG").unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::App(e)) => {
            eprintln!("error[{}] ({}): {e}", e.code(), e.stage());
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
