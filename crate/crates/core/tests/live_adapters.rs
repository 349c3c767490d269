//! Hosted-service adapters against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use salad::audio::AudioClip;
use salad::config::ServiceConfig;
use salad::jp_text::KanaString;
use salad::providers::live::{
    ChatClient, Endpoint, HttpClient, LiveGrammarian, LiveLexicon, LiveRecognizer, LiveSpeechSynth, LiveTranslator,
    RetryPolicy,
};
use salad::providers::{BindingKind, Grammarian, Lexicon, ProviderError, Recognizer, SpeechSynth, Translator};

#[derive(Debug, Clone)]
struct Seen {
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

impl Seen {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).expect("request body is JSON")
    }
}

type Script = dyn Fn(usize, &Seen) -> (u16, &'static str, Vec<u8>) + Send + Sync;

/// Answers each request from `script(index, request)` on its own thread.
struct ScriptedServer {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
    in_flight_peak: Arc<AtomicUsize>,
}

impl ScriptedServer {
    fn start(script: impl Fn(usize, &Seen) -> (u16, &'static str, Vec<u8>) + Send + Sync + 'static) -> Self {
        Self::start_slow(Duration::ZERO, script)
    }

    fn start_slow(
        delay: Duration,
        script: impl Fn(usize, &Seen) -> (u16, &'static str, Vec<u8>) + Send + Sync + 'static,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/endpoint", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let script: Arc<Script> = Arc::new(script);
        let (seen2, peak2) = (seen.clone(), peak.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let (seen, script, in_flight, peak) = (seen2.clone(), script.clone(), in_flight.clone(), peak2.clone());
                std::thread::spawn(move || {
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    let request = read_request(&mut stream);
                    let index = {
                        let mut seen = seen.lock().unwrap();
                        seen.push(request.clone());
                        seen.len() - 1
                    };
                    std::thread::sleep(delay);
                    let (status, content_type, body) = script(index, &request);
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    let head = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        body.len()
                    );
                    let _ = stream.write_all(head.as_bytes());
                    let _ = stream.write_all(&body);
                });
            }
        });
        Self {
            url,
            seen,
            in_flight_peak: peak,
        }
    }

    fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> Seen {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let mut headers = Vec::new();
    loop {
        line.clear();
        reader.read_line(&mut line).unwrap();
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        let (k, v) = trimmed.split_once(':').unwrap();
        headers.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    let header = |name: &str| {
        headers
            .iter()
            .find(|(k, _): &&(String, String)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.clone())
    };
    let mut body = Vec::new();
    if let Some(len) = header("content-length") {
        body.resize(len.parse().unwrap(), 0);
        reader.read_exact(&mut body).unwrap();
    } else if header("transfer-encoding").is_some_and(|v| v.eq_ignore_ascii_case("chunked")) {
        loop {
            line.clear();
            reader.read_line(&mut line).unwrap();
            let size = usize::from_str_radix(line.trim(), 16).unwrap();
            let mut chunk = vec![0; size + 2];
            reader.read_exact(&mut chunk).unwrap();
            if size == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..size]);
        }
    }
    Seen { headers, body }
}

fn chat_reply(content: &Value) -> Vec<u8> {
    json!({"choices": [{"message": {"role": "assistant", "content": content.to_string()}}]})
        .to_string()
        .into_bytes()
}

fn sushi_reply() -> Value {
    json!({
        "kanji": "私は寿司を食べます",
        "kana": "わたしはすしをたべます",
        "romaji": "watashi wa sushi wo tabemasu",
        "segmentation": [
            {"surface": "私", "reading": "わたし"},
            {"surface": "は", "reading": "は"},
            {"surface": "寿司", "reading": "すし"},
            {"surface": "を", "reading": "を"},
            {"surface": "食べます", "reading": "たべます"}
        ]
    })
}

fn fast_retry(retries: u32) -> RetryPolicy {
    RetryPolicy {
        retries,
        base_delay: Duration::from_millis(5),
    }
}

fn client(retries: u32) -> HttpClient {
    HttpClient::new(4, Duration::from_secs(5), fast_retry(retries))
}

fn translator(server: &ScriptedServer, retries: u32) -> LiveTranslator {
    LiveTranslator::new(ChatClient::new(
        client(retries),
        Endpoint::new(&server.url).with_key("sk-test").with_model("test-model"),
    ))
}

#[test]
fn translator_parses_a_valid_reply_and_sends_the_prompt() {
    let server = ScriptedServer::start(|_, _| (200, "application/json", chat_reply(&sushi_reply())));
    let triple = translator(&server, 0).translate("I eat sushi").unwrap();
    assert_eq!(triple.kanji, "私は寿司を食べます");
    assert_eq!(triple.segmentation.len(), 5);

    let requests = server.requests();
    assert_eq!(requests.len(), 1);
    let r = &requests[0];
    assert_eq!(r.header("authorization"), Some("Bearer sk-test"));
    let body = r.json();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0);
    assert_eq!(body["messages"][1]["content"], "I eat sushi");
    let system = body["messages"][0]["content"].as_str().unwrap();
    assert!(!system.is_empty());
    assert!(!system.lines().any(|l| l.starts_with('#')), "prompt header leaked: {system}");
}

#[test]
fn server_errors_and_rate_limits_are_retried() {
    let server = ScriptedServer::start(|i, _| match i {
        0 => (500, "text/plain", b"boom".to_vec()),
        1 => (429, "text/plain", b"slow down".to_vec()),
        _ => (200, "application/json", chat_reply(&sushi_reply())),
    });
    translator(&server, 3).translate("I eat sushi").unwrap();
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn retries_stop_after_the_policy_limit() {
    let server = ScriptedServer::start(|_, _| (503, "text/plain", b"down".to_vec()));
    let err = translator(&server, 2).translate("I eat sushi").unwrap_err();
    assert!(matches!(err, ProviderError::Upstream { .. }), "{err:?}");
    assert!(err.is_upstream());
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = ScriptedServer::start(|_, _| (401, "application/json", b"{\"error\":\"bad key\"}".to_vec()));
    let err = translator(&server, 3).translate("I eat sushi").unwrap_err();
    assert!(err.to_string().contains("401"), "{err}");
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn malformed_replies_are_rejected_without_retry() {
    let cases = [
        json!({"kanji": "x"}),
        {
            let mut extra = sushi_reply();
            extra["confidence"] = json!(0.9);
            extra
        },
        {
            // readings do not spell the kana
            let mut bad = sushi_reply();
            bad["segmentation"][2]["reading"] = json!("さかな");
            bad
        },
        {
            let mut bad = sushi_reply();
            bad["kana"] = json!("watashi");
            bad
        },
    ];
    for content in cases {
        let server = ScriptedServer::start(move |_, _| (200, "application/json", chat_reply(&content)));
        let err = translator(&server, 3).translate("I eat sushi").unwrap_err();
        assert!(matches!(err, ProviderError::MalformedResponse { .. }), "{err:?}");
        assert_eq!(server.requests().len(), 1);
    }
    let server = ScriptedServer::start(|_, _| (200, "application/json", b"not json".to_vec()));
    let err = translator(&server, 3).translate("I eat sushi").unwrap_err();
    assert!(matches!(err, ProviderError::MalformedResponse { .. }));
}

#[test]
fn grammarian_and_lexicon_decode_their_replies() {
    let server = ScriptedServer::start(|_, r| {
        let user = r.json()["messages"][1]["content"].as_str().unwrap().to_owned();
        let content = if user.starts_with('{') {
            json!({"notes": [{"pattern": "〜を", "explanation": "marks the object"}]})
        } else {
            json!({"meaning": "sushi"})
        };
        (200, "application/json", chat_reply(&content))
    });
    let chat = ChatClient::new(client(0), Endpoint::new(&server.url));
    let lexicon = LiveLexicon::new(chat.clone());
    assert_eq!(lexicon.get_meaning("寿司").unwrap(), "sushi");

    let grammarian = LiveGrammarian::new(chat);
    let kana = KanaString::parse("すしをたべます").unwrap();
    let triple = salad::providers::TranslationTriple {
        source_en: "eat sushi".into(),
        kanji: "寿司を食べます".into(),
        romaji: "sushi wo tabemasu".into(),
        segmentation: vec![
            salad::providers::Segment {
                surface: "寿司".into(),
                reading: KanaString::parse("すし").unwrap(),
            },
            salad::providers::Segment {
                surface: "を".into(),
                reading: KanaString::parse("を").unwrap(),
            },
            salad::providers::Segment {
                surface: "食べます".into(),
                reading: KanaString::parse("たべます").unwrap(),
            },
        ],
        kana,
    };
    let notes = grammarian.explain(&triple).unwrap();
    assert_eq!(notes[0].pattern, "〜を");
    let sent: Value = serde_json::from_str(server.requests()[1].json()["messages"][1]["content"].as_str().unwrap()).unwrap();
    assert_eq!(sent["words"], json!(["寿司", "を", "食べます"]));
}

#[test]
fn recognizer_uploads_multipart_wav() {
    let server = ScriptedServer::start(|_, _| (200, "application/json", br#"{"text": " I eat sushi "}"#.to_vec()));
    let recognizer = LiveRecognizer::new(client(0), Endpoint::new(&server.url).with_model("whisper-1"));
    let clip = AudioClip::silence(2205);
    assert_eq!(recognizer.transcribe(&clip).unwrap(), "I eat sushi");

    let r = &server.requests()[0];
    let content_type = r.header("content-type").unwrap();
    let boundary = content_type.strip_prefix("multipart/form-data; boundary=").expect(content_type);
    let body = String::from_utf8_lossy(&r.body);
    assert!(body.starts_with(&format!("--{boundary}\r\n")));
    assert!(body.ends_with(&format!("--{boundary}--\r\n")));
    assert!(body.contains("name=\"model\"\r\n\r\nwhisper-1\r\n"));
    let wav = clip.to_wav();
    assert!(r.body.windows(wav.len()).any(|w| w == wav.as_slice()), "WAV bytes missing from upload");
}

#[test]
fn recognizer_reports_silence_as_unrecognizable() {
    let server = ScriptedServer::start(|_, _| (200, "application/json", br#"{"text": "  "}"#.to_vec()));
    let err = LiveRecognizer::new(client(0), Endpoint::new(&server.url))
        .transcribe(&AudioClip::silence(100))
        .unwrap_err();
    assert!(matches!(err, ProviderError::UnrecognizableAudio(_)));
}

#[test]
fn speech_synth_decodes_wav_and_rejects_garbage() {
    let clip = AudioClip::new((0..4410).map(|i| (i % 100) as i16).collect());
    let wav = clip.to_wav();
    let server = ScriptedServer::start(move |_, _| (200, "audio/wav", wav.clone()));
    let synth = LiveSpeechSynth::new(client(0), Endpoint::new(&server.url));
    let kana = KanaString::parse("ねこ").unwrap();
    assert_eq!(synth.speak(&kana).unwrap().samples(), clip.samples());
    assert_eq!(server.requests()[0].json()["input"], "ねこ");

    let server = ScriptedServer::start(|_, _| (200, "audio/wav", b"RIFF....nope".to_vec()));
    let err = LiveSpeechSynth::new(client(0), Endpoint::new(&server.url)).speak(&kana).unwrap_err();
    assert!(matches!(err, ProviderError::MalformedResponse { .. }));
}

#[test]
fn outbound_concurrency_is_capped() {
    let server = ScriptedServer::start_slow(Duration::from_millis(80), |_, _| {
        (200, "application/json", chat_reply(&json!({"meaning": "cat"})))
    });
    let http = HttpClient::new(2, Duration::from_secs(5), fast_retry(0));
    assert_eq!(http.gate().limit(), 2);
    let lexicon = Arc::new(LiveLexicon::new(ChatClient::new(http, Endpoint::new(&server.url))));
    let threads: Vec<_> = (0..6)
        .map(|_| {
            let lexicon = lexicon.clone();
            std::thread::spawn(move || lexicon.get_meaning("猫").unwrap())
        })
        .collect();
    for t in threads {
        assert_eq!(t.join().unwrap(), "cat");
    }
    assert_eq!(server.requests().len(), 6);
    let peak = server.in_flight_peak.load(Ordering::SeqCst);
    assert!(peak <= 2, "peak concurrency {peak}");
}

#[test]
fn config_binds_live_ports_with_keys_from_the_environment() {
    let server = ScriptedServer::start(|_, _| (200, "application/json", chat_reply(&sushi_reply())));
    let text = format!(
        "provider.translator = live\nlive.llm.url = {}\nlive.llm.key_env = SALAD_TEST_KEY\nlive.retries = 0\n",
        server.url
    );
    let config = ServiceConfig::parse(&text).unwrap();
    assert!(config.build_providers_with(|_| None).is_err(), "missing key must be an error");

    let providers = config
        .build_providers_with(|name| (name == "SALAD_TEST_KEY").then(|| "sk-env".to_owned()))
        .unwrap();
    let bindings = providers.bindings();
    assert_eq!(bindings.translator, BindingKind::Live);
    assert_eq!(bindings.lexicon, BindingKind::Mock);
    let triple = providers.translator.handle().translate("I eat sushi").unwrap();
    assert_eq!(triple.kana.as_str(), "わたしはすしをたべます");
    assert_eq!(server.requests()[0].header("authorization"), Some("Bearer sk-env"));
    assert!(!format!("{:?}", Endpoint::new("http://x").with_key("sk-secret")).contains("sk-secret"));
}
