//! Service configuration: a flat `key = value` text file.
//!
//! ```text
//! # everything is optional; these are the defaults
//! listen_address = 127.0.0.1:8080
//! data_dir = salad-data
//! template_dir =
//! static_dir =
//! cors_origin = http://localhost:5173
//! max_concurrent_requests = 16
//!
//! # mock or live, per port
//! provider.translator = mock
//! provider.grammarian = mock
//! provider.lexicon = mock
//! provider.recognizer = mock
//! provider.speech_synth = mock
//! provider.singing_synth = mock
//!
//! # endpoints for live ports; keys come from the named environment variable
//! live.llm.url = https://api.openai.com/v1/chat/completions
//! live.llm.key_env = OPENAI_API_KEY
//! live.llm.model = gpt-4o-mini
//! live.asr.url = ...
//! live.tts.url = ...
//! live.svs.url = ...
//! live.max_concurrent = 4
//! live.timeout_seconds = 30
//! live.retries = 3
//! ```
//!
//! Translator, grammarian and lexicon share the `llm` endpoint; the
//! recognizer uses `asr`, speech `tts` and singing `svs`. Blank values count
//! as unset. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::providers::live::{
    ChatClient, Endpoint, HttpClient, LiveGrammarian, LiveLexicon, LiveRecognizer, LiveSingingSynth,
    LiveSpeechSynth, LiveTranslator, RetryPolicy,
};
use crate::providers::{BindingKind, Port, ProviderSet};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("environment variable {0} is not set")]
    MissingSecret(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_owned(),
        reason: reason.into(),
    }
}

/// Named endpoint groups for live ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Service {
    Llm,
    Asr,
    Tts,
    Svs,
}

impl Service {
    pub const ALL: [Service; 4] = [Service::Llm, Service::Asr, Service::Tts, Service::Svs];

    pub fn key(self) -> &'static str {
        match self {
            Self::Llm => "llm",
            Self::Asr => "asr",
            Self::Tts => "tts",
            Self::Svs => "svs",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EndpointConfig {
    pub url: Option<String>,
    /// Name of the environment variable holding the API key.
    pub key_env: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bindings {
    pub translator: BindingKind,
    pub grammarian: BindingKind,
    pub lexicon: BindingKind,
    pub recognizer: BindingKind,
    pub speech_synth: BindingKind,
    pub singing_synth: BindingKind,
}

impl Default for Bindings {
    fn default() -> Self {
        Self {
            translator: BindingKind::Mock,
            grammarian: BindingKind::Mock,
            lexicon: BindingKind::Mock,
            recognizer: BindingKind::Mock,
            speech_synth: BindingKind::Mock,
            singing_synth: BindingKind::Mock,
        }
    }
}

impl Bindings {
    fn ports(&self) -> [(&'static str, BindingKind, Service); 6] {
        [
            ("translator", self.translator, Service::Llm),
            ("grammarian", self.grammarian, Service::Llm),
            ("lexicon", self.lexicon, Service::Llm),
            ("recognizer", self.recognizer, Service::Asr),
            ("speech_synth", self.speech_synth, Service::Tts),
            ("singing_synth", self.singing_synth, Service::Svs),
        ]
    }

    fn slot(&mut self, port: &str) -> Option<&mut BindingKind> {
        Some(match port {
            "translator" => &mut self.translator,
            "grammarian" => &mut self.grammarian,
            "lexicon" => &mut self.lexicon,
            "recognizer" => &mut self.recognizer,
            "speech_synth" => &mut self.speech_synth,
            "singing_synth" => &mut self.singing_synth,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen_address: SocketAddr,
    pub data_dir: PathBuf,
    pub template_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub cors_origin: String,
    pub max_concurrent_requests: usize,
    pub bindings: Bindings,
    pub endpoints: BTreeMap<Service, EndpointConfig>,
    pub live_max_concurrent: usize,
    pub live_timeout: Duration,
    pub live_retries: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_address: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("salad-data"),
            template_dir: None,
            static_dir: None,
            cors_origin: "http://localhost:5173".into(),
            max_concurrent_requests: 16,
            bindings: Bindings::default(),
            endpoints: BTreeMap::new(),
            live_max_concurrent: 4,
            live_timeout: Duration::from_secs(30),
            live_retries: 3,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("{value:?} is not a valid number")))
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        // relative paths in a config file are relative to the file
        if let Some(base) = path.parent() {
            for dir in [Some(&mut config.data_dir), config.template_dir.as_mut(), config.static_dir.as_mut()]
                .into_iter()
                .flatten()
            {
                if dir.is_relative() {
                    *dir = base.join(&*dir);
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_owned(), i + 1) {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    reason: format!("{key} already set on line {first}"),
                });
            }
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let optional = |v: &str| (!v.is_empty()).then(|| v.to_owned());
        match key {
            "listen_address" => {
                self.listen_address = value
                    .parse()
                    .map_err(|_| invalid(key, format!("{value:?} is not host:port")))?
            }
            "data_dir" => {
                if value.is_empty() {
                    return Err(invalid(key, "must not be empty"));
                }
                self.data_dir = PathBuf::from(value)
            }
            "template_dir" => self.template_dir = optional(value).map(PathBuf::from),
            "static_dir" => self.static_dir = optional(value).map(PathBuf::from),
            "cors_origin" => self.cors_origin = value.to_owned(),
            "max_concurrent_requests" => self.max_concurrent_requests = number(key, value)?,
            "live.max_concurrent" => self.live_max_concurrent = number(key, value)?,
            "live.timeout_seconds" => self.live_timeout = Duration::from_secs(number(key, value)?),
            "live.retries" => self.live_retries = number(key, value)?,
            _ => {
                if let Some(port) = key.strip_prefix("provider.") {
                    let kind = match value {
                        "mock" => BindingKind::Mock,
                        "live" => BindingKind::Live,
                        other => return Err(invalid(key, format!("{other:?} is neither mock nor live"))),
                    };
                    *self.bindings.slot(port).ok_or_else(|| invalid(key, "unknown port"))? = kind;
                    return Ok(());
                }
                let unknown = || invalid(key, "unknown key");
                let rest = key.strip_prefix("live.").ok_or_else(unknown)?;
                let (service, field) = rest.split_once('.').ok_or_else(unknown)?;
                let service = Service::ALL
                    .into_iter()
                    .find(|s| s.key() == service)
                    .ok_or_else(unknown)?;
                let endpoint = self.endpoints.entry(service).or_default();
                match field {
                    "url" => endpoint.url = optional(value),
                    "key_env" => endpoint.key_env = optional(value),
                    "model" => endpoint.model = optional(value),
                    _ => return Err(unknown()),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_concurrent_requests == 0 {
            return Err(invalid("max_concurrent_requests", "must be at least 1"));
        }
        if self.live_max_concurrent == 0 {
            return Err(invalid("live.max_concurrent", "must be at least 1"));
        }
        for (port, kind, service) in self.bindings.ports() {
            if kind == BindingKind::Live && self.endpoint(service).url.is_none() {
                return Err(invalid(
                    &format!("provider.{port}"),
                    format!("live binding needs live.{}.url", service.key()),
                ));
            }
        }
        Ok(())
    }

    pub fn endpoint(&self, service: Service) -> EndpointConfig {
        self.endpoints.get(&service).cloned().unwrap_or_default()
    }

    /// Binds every port, reading API keys from the process environment.
    pub fn build_providers(&self) -> Result<ProviderSet, ConfigError> {
        self.build_providers_with(|name| std::env::var(name).ok())
    }

    pub fn build_providers_with(&self, env: impl Fn(&str) -> Option<String>) -> Result<ProviderSet, ConfigError> {
        self.validate()?;
        let mut set = ProviderSet::mock();
        let b = &self.bindings;
        if b.ports().iter().all(|(_, kind, _)| *kind == BindingKind::Mock) {
            return Ok(set);
        }
        let http = HttpClient::new(
            self.live_max_concurrent,
            self.live_timeout,
            RetryPolicy {
                retries: self.live_retries,
                ..RetryPolicy::default()
            },
        );
        let endpoint = |service: Service| -> Result<Endpoint, ConfigError> {
            let cfg = self.endpoint(service);
            let url = cfg.url.expect("validated");
            let mut endpoint = Endpoint::new(url);
            if let Some(var) = &cfg.key_env {
                endpoint = endpoint.with_key(env(var).ok_or_else(|| ConfigError::MissingSecret(var.clone()))?);
            }
            if let Some(model) = cfg.model {
                endpoint = endpoint.with_model(model);
            }
            Ok(endpoint)
        };
        let chat = || endpoint(Service::Llm).map(|e| ChatClient::new(http.clone(), e));
        if b.translator == BindingKind::Live {
            set.translator = Port::live(Arc::new(LiveTranslator::new(chat()?)));
        }
        if b.grammarian == BindingKind::Live {
            set.grammarian = Port::live(Arc::new(LiveGrammarian::new(chat()?)));
        }
        if b.lexicon == BindingKind::Live {
            set.lexicon = Port::live(Arc::new(LiveLexicon::new(chat()?)));
        }
        if b.recognizer == BindingKind::Live {
            set.recognizer = Port::live(Arc::new(LiveRecognizer::new(http.clone(), endpoint(Service::Asr)?)));
        }
        if b.speech_synth == BindingKind::Live {
            set.speech_synth = Port::live(Arc::new(LiveSpeechSynth::new(http.clone(), endpoint(Service::Tts)?)));
        }
        if b.singing_synth == BindingKind::Live {
            set.singing_synth = Port::live(Arc::new(LiveSingingSynth::new(http.clone(), endpoint(Service::Svs)?)));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(ServiceConfig::parse("# nothing\n\n").unwrap(), ServiceConfig::default());
    }

    #[test]
    fn parses_every_key() {
        let c = ServiceConfig::parse(
            "listen_address = 0.0.0.0:9000\ndata_dir = /tmp/s\ntemplate_dir = tpl\nstatic_dir =\n\
             cors_origin = http://example.test\nmax_concurrent_requests = 3\nprovider.translator = live\n\
             live.llm.url = http://llm\nlive.llm.key_env = LLM_KEY\nlive.llm.model = m\n\
             live.max_concurrent = 2\nlive.timeout_seconds = 5\nlive.retries = 1\n",
        )
        .unwrap();
        assert_eq!(c.listen_address.port(), 9000);
        assert_eq!(c.data_dir, PathBuf::from("/tmp/s"));
        assert_eq!(c.template_dir, Some(PathBuf::from("tpl")));
        assert_eq!(c.static_dir, None);
        assert_eq!(c.max_concurrent_requests, 3);
        assert_eq!(c.bindings.translator, BindingKind::Live);
        assert_eq!(c.bindings.lexicon, BindingKind::Mock);
        assert_eq!(c.endpoint(Service::Llm).key_env.as_deref(), Some("LLM_KEY"));
        assert_eq!(c.live_timeout, Duration::from_secs(5));
        assert_eq!(c.live_retries, 1);
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "listen_address 1",
            "listen_address = nowhere",
            "bogus = 1",
            "provider.translator = maybe",
            "provider.painter = mock",
            "live.llm.colour = red",
            "live.xyz.url = http://x",
            "max_concurrent_requests = 0",
            "max_concurrent_requests = many",
            "data_dir = a\ndata_dir = b",
            "provider.recognizer = live",
        ] {
            assert!(ServiceConfig::parse(text).is_err(), "accepted {text:?}");
        }
    }

    #[test]
    fn live_binding_needs_its_secret() {
        let c = ServiceConfig::parse("provider.lexicon = live\nlive.llm.url = http://llm\nlive.llm.key_env = K\n").unwrap();
        assert!(matches!(c.build_providers_with(|_| None), Err(ConfigError::MissingSecret(v)) if v == "K"));
        let set = c.build_providers_with(|_| Some("secret".into())).unwrap();
        assert_eq!(set.bindings().lexicon, BindingKind::Live);
        assert_eq!(set.bindings().translator, BindingKind::Mock);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("salad.conf");
        std::fs::write(&path, "data_dir = store\n").unwrap();
        assert_eq!(ServiceConfig::load(&path).unwrap().data_dir, dir.path().join("store"));
    }
}
