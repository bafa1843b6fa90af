//! Engine configuration.
//!
//! Loaded from a TOML file; every table rejects unknown keys. Command-line
//! flags are applied on top of the file, which is applied on top of the
//! defaults. API keys are never stored: a provider names the environment
//! variable to read them from.
//!
//! ```toml
//! mock_script = "fixtures/mock.json"   # offline scripted providers
//! deterministic_clock = 0              # frozen clock, in ms
//!
//! [discovery]
//! max_diffusion_depth = 5
//! max_intents = 8
//! top_k = 20
//! max_queries = 6
//! alpha = 0.5
//! workers = 8
//!
//! [providers.central]
//! endpoint = "http://localhost:8000/v1"
//! model = "reasoner"
//! api_key_env = "CENTRAL_API_KEY"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use gistchain_core::context::DEFAULT_CONTEXT_BUDGET;
use gistchain_core::document::{DEFAULT_BOOTSTRAP_BUDGET, DEFAULT_GIST_BUDGET};
use gistchain_core::hybrid::DEFAULT_POOL_SIZE;
use gistchain_core::Bm25Params;
use serde::{Deserialize, Serialize};

use crate::discovery::DiscoveryConfig;
use crate::gateway::{FrozenClock, Gateway, HttpChat, HttpEmbed, HttpSettings, MockScript, RetryPolicy, Role};
use crate::store::GistMode;
use crate::synthesis::SynthesisConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {0}: {1}")]
    Io(PathBuf, String),
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("provider setup: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GistConfig {
    pub mode: GistMode,
    /// Token budget of LLM gists.
    pub budget: usize,
    /// Prefix length of truncation gists.
    pub bootstrap_budget: usize,
}

impl Default for GistConfig {
    fn default() -> Self {
        Self {
            mode: GistMode::Llm,
            budget: DEFAULT_GIST_BUDGET,
            bootstrap_budget: DEFAULT_BOOTSTRAP_BUDGET,
        }
    }
}

impl GistConfig {
    pub fn effective_budget(&self) -> usize {
        match self.mode {
            GistMode::Llm => self.budget,
            GistMode::Truncation => self.bootstrap_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexConfig {
    pub k1: f64,
    pub b: f64,
    pub pool_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self {
            k1: p.k1,
            b: p.b,
            pool_size: DEFAULT_POOL_SIZE,
            dir: None,
        }
    }
}

impl IndexConfig {
    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextConfig {
    pub budget: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_CONTEXT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Inputs per embeddings request.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_retries() -> u32 {
    RetryPolicy::default().max_retries
}

fn default_timeout() -> u64 {
    60
}

fn default_batch() -> usize {
    64
}

impl ProviderConfig {
    fn settings(&self) -> Result<HttpSettings, ConfigError> {
        let api_key = match &self.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| ConfigError::Provider(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        Ok(HttpSettings {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key,
            timeout: Duration::from_secs(self.timeout_secs),
        })
    }

    fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Providers {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central: Option<ProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<ProviderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<ProviderConfig>,
    /// Falls back to the central provider when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream: Option<ProviderConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic_clock: Option<u64>,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub gist: GistConfig,
    #[serde(default)]
    pub index: IndexConfig,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub providers: Providers,
}

/// Values given on the command line; `None` leaves the file value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mock_script: Option<PathBuf>,
    pub deterministic_clock: Option<u64>,
    pub max_depth: Option<usize>,
    pub max_intents: Option<usize>,
    pub top_k: Option<usize>,
    pub max_queries: Option<usize>,
    pub alpha: Option<f64>,
    pub workers: Option<usize>,
    pub context_budget: Option<usize>,
    pub gist_mode: Option<GistMode>,
    pub gist_budget: Option<usize>,
    pub pool_size: Option<usize>,
    pub index_dir: Option<PathBuf>,
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Defaults, then the file if given, then the flags.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        if o.mock_script.is_some() {
            self.mock_script = o.mock_script.clone();
        }
        if o.deterministic_clock.is_some() {
            self.deterministic_clock = o.deterministic_clock;
        }
        if o.index_dir.is_some() {
            self.index.dir = o.index_dir.clone();
        }
        set(&mut self.discovery.max_diffusion_depth, &o.max_depth);
        set(&mut self.discovery.max_intents, &o.max_intents);
        set(&mut self.discovery.top_k, &o.top_k);
        set(&mut self.discovery.max_queries, &o.max_queries);
        set(&mut self.discovery.alpha, &o.alpha);
        set(&mut self.discovery.workers, &o.workers);
        set(&mut self.synthesis.workers, &o.workers);
        set(&mut self.context.budget, &o.context_budget);
        set(&mut self.gist.mode, &o.gist_mode);
        if let Some(b) = o.gist_budget {
            match self.gist.mode {
                GistMode::Llm => self.gist.budget = b,
                GistMode::Truncation => self.gist.bootstrap_budget = b,
            }
        }
        set(&mut self.index.pool_size, &o.pool_size);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.discovery.validate().map_err(ConfigError::Invalid)?;
        let s = &self.synthesis;
        if s.workers == 0 || s.chunk_tokens == 0 || s.evidence_cap == 0 || s.summary_cap == 0 {
            return Err(ConfigError::Invalid("synthesis values must be positive".into()));
        }
        if self.gist.budget == 0 || self.gist.bootstrap_budget == 0 {
            return Err(ConfigError::Invalid("gist budgets must be positive".into()));
        }
        if self.context.budget == 0 {
            return Err(ConfigError::Invalid("context budget must be positive".into()));
        }
        if self.index.pool_size == 0 {
            return Err(ConfigError::Invalid("index pool_size must be positive".into()));
        }
        if !(self.index.k1 >= 0.0 && (0.0..=1.0).contains(&self.index.b)) {
            return Err(ConfigError::Invalid("BM25 needs k1 >= 0 and b in [0, 1]".into()));
        }
        Ok(())
    }

    /// Gateway wired to the scripted mocks, or to HTTP providers when no
    /// mock script is configured.
    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        if let Some(path) = &self.mock_script {
            let script = MockScript::load(path).map_err(|e| ConfigError::Provider(e.to_string()))?;
            let gw = script
                .into_gateway()
                .map_err(|e| ConfigError::Provider(e.to_string()))?;
            return Ok(match self.deterministic_clock {
                Some(ms) => gw.with_clock(Arc::new(FrozenClock(ms))),
                None => gw,
            });
        }
        let mut gw = Gateway::new();
        if let Some(ms) = self.deterministic_clock {
            gw = gw.with_clock(Arc::new(FrozenClock(ms)));
        }
        let p = &self.providers;
        let chats = [
            (Role::Central, &p.central),
            (Role::Auxiliary, &p.auxiliary),
            (Role::Downstream, &p.downstream),
        ];
        for (role, cfg) in chats {
            if let Some(cfg) = cfg {
                gw = gw.with_chat(role, Arc::new(HttpChat::new(cfg.settings()?)), cfg.retry());
            }
        }
        if let Some(cfg) = &p.embedder {
            gw = gw.with_embedder(Arc::new(HttpEmbed::new(cfg.settings()?)), cfg.retry(), cfg.batch_size);
        }
        Ok(gw)
    }
}
