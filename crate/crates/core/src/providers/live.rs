//! Adapters for hosted services.
//!
//! Translation, grammar and definitions go to a chat-completions endpoint
//! with the prompt templates under `data/prompts/`. Recognition takes a
//! multipart WAV upload and expects `{"text": ...}` back; speech and singing
//! post JSON and expect WAV bytes in the house format.
//!
//! Every request passes through a shared [`RequestGate`] that caps how many
//! calls are in flight, and is retried up to [`RetryPolicy::retries`] times
//! with exponential backoff on transport errors, 429 and 5xx. Replies are
//! validated strictly; a malformed reply is rejected, not retried.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    GrammarNote, Grammarian, Lexicon, ProviderError, Recognizer, Segment, SingingSynth, SpeechSynth,
    TranslationTriple, Translator,
};
use crate::audio::AudioClip;
use crate::jp_text::KanaString;
use crate::songcraft::SongScore;

const TRANSLATE_PROMPT: &str = include_str!("../../data/prompts/translate.txt");
const GRAMMAR_PROMPT: &str = include_str!("../../data/prompts/grammar.txt");
const DEFINE_PROMPT: &str = include_str!("../../data/prompts/define.txt");

/// Largest reply body accepted from any service.
const MAX_REPLY_BYTES: u64 = 32 * 1024 * 1024;

/// A system prompt. Leading `#` lines are a header and are not sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub system: String,
}

impl PromptTemplate {
    pub fn parse(name: &str, source: &str) -> Self {
        let system = source
            .lines()
            .skip_while(|l| l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
            .trim()
            .to_owned();
        Self {
            name: name.to_owned(),
            system,
        }
    }

    pub fn translate() -> Self {
        Self::parse("translate", TRANSLATE_PROMPT)
    }

    pub fn grammar() -> Self {
        Self::parse("grammar", GRAMMAR_PROMPT)
    }

    pub fn define() -> Self {
        Self::parse("define", DEFINE_PROMPT)
    }
}

/// Where one service lives. The key is read from the environment by the
/// caller and never written anywhere.
#[derive(Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub url: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint")
            .field("url", &self.url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("model", &self.model)
            .finish()
    }
}

impl Endpoint {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            model: None,
        }
    }

    pub fn with_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1 << attempt.min(16))
    }
}

/// Counting semaphore for outbound requests.
#[derive(Debug)]
pub struct RequestGate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct GatePass<'a> {
    gate: &'a RequestGate,
}

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        *self.gate.in_flight.lock().expect("gate poisoned") -= 1;
        self.gate.freed.notify_one();
    }
}

impl RequestGate {
    pub fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> GatePass<'_> {
        let mut n = self.in_flight.lock().expect("gate poisoned");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
        GatePass { gate: self }
    }
}

enum Body<'a> {
    Json(&'a serde_json::Value),
    Raw { content_type: &'a str, bytes: &'a [u8] },
}

/// Blocking HTTP client shared by every live adapter in a provider set.
#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    gate: Arc<RequestGate>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("gate", &self.gate)
            .field("retry", &self.retry)
            .finish()
    }
}

impl HttpClient {
    pub fn new(max_concurrent: usize, timeout: Duration, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            gate: Arc::new(RequestGate::new(max_concurrent)),
            retry,
        }
    }

    pub fn gate(&self) -> &RequestGate {
        &self.gate
    }

    fn post(&self, service: &str, endpoint: &Endpoint, body: Body<'_>) -> Result<Vec<u8>, ProviderError> {
        let upstream = |message: String| ProviderError::Upstream {
            service: service.to_owned(),
            message,
        };
        let mut attempt = 0;
        loop {
            let outcome = {
                let _pass = self.gate.acquire();
                let mut request = self.agent.post(&endpoint.url);
                if let Some(key) = &endpoint.api_key {
                    request = request.header("Authorization", format!("Bearer {key}"));
                }
                let sent = match &body {
                    Body::Json(value) => request.send_json(value),
                    Body::Raw { content_type, bytes } => request.header("Content-Type", *content_type).send(*bytes),
                };
                match sent {
                    Ok(response) => {
                        let status = response.status();
                        let bytes = response
                            .into_body()
                            .with_config()
                            .limit(MAX_REPLY_BYTES)
                            .read_to_vec();
                        match bytes {
                            Ok(bytes) if status.is_success() => return Ok(bytes),
                            Ok(bytes) => {
                                let snippet: String = String::from_utf8_lossy(&bytes).chars().take(200).collect();
                                let retryable = status.as_u16() == 429 || status.is_server_error();
                                let message = format!("HTTP {status}: {snippet}");
                                if !retryable {
                                    return Err(upstream(message));
                                }
                                message
                            }
                            Err(e) => format!("reading reply: {e}"),
                        }
                    }
                    Err(e) => e.to_string(),
                }
            };
            if attempt >= self.retry.retries {
                return Err(upstream(format!("{outcome} (after {} attempts)", attempt + 1)));
            }
            tracing::warn!(service, attempt, "retrying: {outcome}");
            std::thread::sleep(self.retry.delay(attempt));
            attempt += 1;
        }
    }
}

fn malformed(service: &str, message: impl std::fmt::Display) -> ProviderError {
    ProviderError::MalformedResponse {
        service: service.to_owned(),
        message: message.to_string(),
    }
}

/// Chat-completions client that expects a single JSON object as the reply.
#[derive(Debug, Clone)]
pub struct ChatClient {
    http: HttpClient,
    endpoint: Endpoint,
}

const DEFAULT_CHAT_MODEL: &str = "gpt-4o-mini";

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl ChatClient {
    pub fn new(http: HttpClient, endpoint: Endpoint) -> Self {
        Self { http, endpoint }
    }

    /// Sends `user` under `prompt` and decodes the reply content as `T`.
    pub fn complete<T: DeserializeOwned>(&self, prompt: &PromptTemplate, user: &str) -> Result<T, ProviderError> {
        let service = prompt.name.as_str();
        let request = json!({
            "model": self.endpoint.model.as_deref().unwrap_or(DEFAULT_CHAT_MODEL),
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": user},
            ],
        });
        let bytes = self.http.post(service, &self.endpoint, Body::Json(&request))?;
        let reply: ChatReply = serde_json::from_slice(&bytes).map_err(|e| malformed(service, e))?;
        let content = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| malformed(service, "no choices"))?
            .message
            .content;
        serde_json::from_str(content.trim()).map_err(|e| malformed(service, format!("{e} in {content:?}")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslateReply {
    kanji: String,
    kana: String,
    romaji: String,
    segmentation: Vec<SegmentReply>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentReply {
    surface: String,
    reading: String,
}

#[derive(Debug, Clone)]
pub struct LiveTranslator {
    chat: ChatClient,
    prompt: PromptTemplate,
}

impl LiveTranslator {
    pub fn new(chat: ChatClient) -> Self {
        Self {
            chat,
            prompt: PromptTemplate::translate(),
        }
    }
}

impl Translator for LiveTranslator {
    fn translate(&self, source_en: &str) -> Result<TranslationTriple, ProviderError> {
        let source_en = source_en.trim();
        if source_en.is_empty() {
            return Err(ProviderError::UntranslatableInput("empty text".into()));
        }
        let reply: TranslateReply = self.chat.complete(&self.prompt, source_en)?;
        let bad = |m: String| malformed("translate", m);
        let kana = KanaString::parse(reply.kana.trim()).map_err(|e| bad(format!("kana: {e}")))?;
        let segmentation = reply
            .segmentation
            .into_iter()
            .map(|s| {
                Ok(Segment {
                    reading: KanaString::parse(&s.reading).map_err(|e| bad(format!("reading of {}: {e}", s.surface)))?,
                    surface: s.surface,
                })
            })
            .collect::<Result<Vec<_>, ProviderError>>()?;
        if segmentation.is_empty() || reply.romaji.trim().is_empty() {
            return Err(bad("empty segmentation or romaji".into()));
        }
        let joined: String = segmentation.iter().map(|s| s.reading.as_str()).collect();
        if joined != kana.as_str() {
            return Err(bad(format!("readings spell {joined:?} but kana is {kana}")));
        }
        let triple = TranslationTriple {
            source_en: source_en.to_owned(),
            kanji: reply.kanji,
            kana,
            romaji: reply.romaji.trim().to_owned(),
            segmentation,
        };
        triple.validate().map_err(bad)?;
        Ok(triple)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarReply {
    notes: Vec<GrammarNote>,
}

#[derive(Debug, Clone)]
pub struct LiveGrammarian {
    chat: ChatClient,
    prompt: PromptTemplate,
}

impl LiveGrammarian {
    pub fn new(chat: ChatClient) -> Self {
        Self {
            chat,
            prompt: PromptTemplate::grammar(),
        }
    }
}

impl Grammarian for LiveGrammarian {
    fn explain(&self, triple: &TranslationTriple) -> Result<Vec<GrammarNote>, ProviderError> {
        let words: Vec<&str> = triple.words().map(|s| s.surface.as_str()).collect();
        let user = json!({"english": triple.source_en, "japanese": triple.kanji, "words": words}).to_string();
        let reply: GrammarReply = self.chat.complete(&self.prompt, &user)?;
        if let Some(n) = reply
            .notes
            .iter()
            .find(|n| n.pattern.trim().is_empty() || n.explanation.trim().is_empty())
        {
            return Err(malformed("grammar", format!("empty field in {n:?}")));
        }
        Ok(reply.notes)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DefineReply {
    meaning: String,
}

#[derive(Debug, Clone)]
pub struct LiveLexicon {
    chat: ChatClient,
    prompt: PromptTemplate,
}

impl LiveLexicon {
    pub fn new(chat: ChatClient) -> Self {
        Self {
            chat,
            prompt: PromptTemplate::define(),
        }
    }
}

impl Lexicon for LiveLexicon {
    fn get_meaning(&self, surface: &str) -> Result<String, ProviderError> {
        if surface.is_empty() {
            return Err(ProviderError::EmptyInput("surface"));
        }
        let reply: DefineReply = self.chat.complete(&self.prompt, surface)?;
        let meaning = reply.meaning.trim();
        if meaning.is_empty() || meaning.contains('\n') {
            return Err(malformed("define", format!("unusable meaning {meaning:?}")));
        }
        Ok(meaning.to_owned())
    }
}

/// Whisper-style transcription endpoint.
#[derive(Debug, Clone)]
pub struct LiveRecognizer {
    http: HttpClient,
    endpoint: Endpoint,
}

#[derive(Deserialize)]
struct TranscriptReply {
    text: String,
}

impl LiveRecognizer {
    pub fn new(http: HttpClient, endpoint: Endpoint) -> Self {
        Self { http, endpoint }
    }
}

fn multipart(boundary: &str, fields: &[(&str, &str)], file: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(file.len() + 512);
    for (name, value) in fields {
        out.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes(),
        );
    }
    out.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"input.wav\"\r\nContent-Type: audio/wav\r\n\r\n"
        )
        .as_bytes(),
    );
    out.extend_from_slice(file);
    out.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    out
}

impl Recognizer for LiveRecognizer {
    fn transcribe(&self, audio: &AudioClip) -> Result<String, ProviderError> {
        if audio.is_empty() {
            return Err(ProviderError::UnrecognizableAudio("empty clip".into()));
        }
        let boundary = format!("salad-{}", uuid::Uuid::new_v4().simple());
        let mut fields = vec![("response_format", "json"), ("language", "en")];
        if let Some(model) = &self.endpoint.model {
            fields.push(("model", model));
        }
        let body = multipart(&boundary, &fields, &audio.to_wav());
        let content_type = format!("multipart/form-data; boundary={boundary}");
        let bytes = self.http.post(
            "recognize",
            &self.endpoint,
            Body::Raw {
                content_type: &content_type,
                bytes: &body,
            },
        )?;
        let reply: TranscriptReply = serde_json::from_slice(&bytes).map_err(|e| malformed("recognize", e))?;
        let text = reply.text.trim();
        if text.is_empty() {
            return Err(ProviderError::UnrecognizableAudio("no speech found".into()));
        }
        Ok(text.to_owned())
    }
}

fn decode_wav(service: &str, bytes: &[u8]) -> Result<AudioClip, ProviderError> {
    let clip = AudioClip::from_wav(bytes).map_err(|e| malformed(service, e))?;
    if clip.is_empty() {
        return Err(malformed(service, "empty audio"));
    }
    Ok(clip)
}

#[derive(Debug, Clone)]
pub struct LiveSpeechSynth {
    http: HttpClient,
    endpoint: Endpoint,
}

impl LiveSpeechSynth {
    pub fn new(http: HttpClient, endpoint: Endpoint) -> Self {
        Self { http, endpoint }
    }
}

impl SpeechSynth for LiveSpeechSynth {
    fn speak(&self, kana: &KanaString) -> Result<AudioClip, ProviderError> {
        if kana.is_empty() {
            return Err(ProviderError::EmptyInput("kana"));
        }
        let request = json!({
            "model": self.endpoint.model,
            "input": kana.as_str(),
            "response_format": "wav",
            "sample_rate": crate::audio::SAMPLE_RATE,
        });
        let bytes = self.http.post("speak", &self.endpoint, Body::Json(&request))?;
        decode_wav("speak", &bytes)
    }
}

#[derive(Serialize)]
struct SingRequest<'a> {
    sample_rate: u32,
    lyric: &'a str,
    notes: Vec<SingNote<'a>>,
}

#[derive(Serialize)]
struct SingNote<'a> {
    midi_pitch: u8,
    duration: f64,
    phonemes: &'a [crate::jp_text::Phoneme],
}

#[derive(Debug, Clone)]
pub struct LiveSingingSynth {
    http: HttpClient,
    endpoint: Endpoint,
}

impl LiveSingingSynth {
    pub fn new(http: HttpClient, endpoint: Endpoint) -> Self {
        Self { http, endpoint }
    }
}

impl SingingSynth for LiveSingingSynth {
    fn render(&self, score: &SongScore) -> Result<AudioClip, ProviderError> {
        if score.notes.is_empty() {
            return Err(ProviderError::EmptyScore);
        }
        let request = SingRequest {
            sample_rate: crate::audio::SAMPLE_RATE,
            lyric: score.lyric_text.as_str(),
            notes: score
                .notes
                .iter()
                .map(|n| SingNote {
                    midi_pitch: n.note.midi_pitch(),
                    duration: n.note.duration(),
                    phonemes: &n.phonemes.symbols,
                })
                .collect(),
        };
        let value = serde_json::to_value(&request).expect("score serializes");
        let bytes = self.http.post("sing", &self.endpoint, Body::Json(&value))?;
        decode_wav("sing", &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn prompts_drop_header() {
        for p in [PromptTemplate::translate(), PromptTemplate::grammar(), PromptTemplate::define()] {
            assert!(!p.system.is_empty());
            assert!(!p.system.starts_with('#'), "{}", p.name);
            assert!(p.system.contains("JSON"), "{}", p.name);
        }
    }

    #[test]
    fn backoff_doubles() {
        let policy = RetryPolicy {
            retries: 3,
            base_delay: Duration::from_millis(100),
        };
        let delays: Vec<u128> = (0..3).map(|a| policy.delay(a).as_millis()).collect();
        assert_eq!(delays, [100, 200, 400]);
    }

    #[test]
    fn gate_caps_concurrency() {
        let gate = RequestGate::new(2);
        let current = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _pass = gate.acquire();
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    current.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert_eq!(peak.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn multipart_layout() {
        let body = multipart("B", &[("model", "m")], b"RIFF");
        let text = String::from_utf8(body).unwrap();
        assert!(text.starts_with("--B\r\nContent-Disposition: form-data; name=\"model\"\r\n\r\nm\r\n"));
        assert!(text.contains("filename=\"input.wav\"\r\nContent-Type: audio/wav\r\n\r\nRIFF\r\n--B--\r\n"));
    }

    #[test]
    fn endpoint_debug_hides_key() {
        let e = Endpoint::new("http://x").with_key("sk-secret");
        assert!(!format!("{e:?}").contains("sk-secret"));
    }
}
