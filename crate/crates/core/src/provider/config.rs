//! Provider selection from a TOML file.
//!
//! ```toml
//! [provider]
//! kind = "openai"            # openai | openai-compatible | gemini
//! model_name = "gpt-4o-mini"
//! preset = "api-default"     # llama | mistral | api-default
//! context_tokens = 16385
//!
//! [embedder]
//! kind = "openai"            # openai | openai-compatible | hash
//! model_name = "text-embedding-3-small"
//! ```
//!
//! Credentials are read from environment variables only; the file may name
//! the variable (`api_key_env`) but never hold the key.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::http::{GeminiChat, HttpClient, OpenAiChat, OpenAiEmbedder};
use super::mock::HashEmbedder;
use super::{ChatProvider, Embedder, GenerationParams, ParamsPreset, ProviderError, RetryPolicy, Retrying};

pub const OPENAI_ENDPOINT: &str = "https://api.openai.com/v1";
pub const GEMINI_ENDPOINT: &str = "https://generativelanguage.googleapis.com/v1beta";
pub const OPENAI_KEY_ENV: &str = "OPENAI_API_KEY";
pub const GEMINI_KEY_ENV: &str = "GEMINI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Openai,
    /// Self-hosted servers with the OpenAI chat protocol; key optional.
    OpenaiCompatible,
    Gemini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub model_name: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub preset: ParamsPreset,
    #[serde(default)]
    pub max_new_tokens: Option<u32>,
    /// Declared context window in tokens; prompts that cannot fit are
    /// rejected before any request is sent.
    #[serde(default)]
    pub context_tokens: Option<usize>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Send the system text as a prefix of the user message.
    #[serde(default)]
    pub merge_system_into_user: bool,
    #[serde(default)]
    pub max_attempts: Option<u32>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    Openai,
    OpenaiCompatible,
    /// Offline seeded vectors; no network.
    Hash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub model_name: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Vector size for the `hash` embedder.
    #[serde(default)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub provider: Option<ProviderConfig>,
    pub embedder: Option<EmbedderConfig>,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ProviderError> {
        let file: Self = toml::from_str(text).map_err(|e| ProviderError::Config(e.to_string()))?;
        if let Some(p) = &file.provider {
            p.params().validate()?;
            check_env_name(p.api_key_env.as_deref())?;
        }
        if let Some(e) = &file.embedder {
            check_env_name(e.api_key_env.as_deref())?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Rejects values that look like a key pasted in place of a variable name.
fn check_env_name(name: Option<&str>) -> Result<(), ProviderError> {
    match name {
        Some(n)
            if n.is_empty()
                || n.starts_with(|c: char| c.is_ascii_digit())
                || !n
                    .chars()
                    .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_') =>
        {
            Err(ProviderError::Config(
                "api_key_env must name an environment variable (A-Z, 0-9, _)".into(),
            ))
        }
        _ => Ok(()),
    }
}

impl ProviderConfig {
    pub fn params(&self) -> GenerationParams {
        let mut params = GenerationParams::preset(self.preset, &self.model_name);
        if let Some(n) = self.max_new_tokens {
            params.max_new_tokens = n;
        }
        params
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        let mut policy = RetryPolicy::default();
        if let Some(n) = self.max_attempts {
            policy.max_attempts = n;
        }
        if let Some(s) = self.timeout_secs {
            policy.timeout = Duration::from_secs(s);
        }
        policy
    }
}

fn key_from(
    var: Option<&str>,
    default_var: Option<&str>,
    required: bool,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<Option<String>, ProviderError> {
    let Some(var) = var.or(default_var) else {
        return Ok(None);
    };
    match lookup(var).filter(|k| !k.is_empty()) {
        Some(key) => Ok(Some(key)),
        None if required => Err(ProviderError::Config(format!(
            "environment variable {var} is not set"
        ))),
        None => Ok(None),
    }
}

fn env_lookup(var: &str) -> Option<String> {
    std::env::var(var).ok()
}

/// Builds a retrying chat provider, reading credentials from the process
/// environment.
pub fn build_chat_provider(cfg: &ProviderConfig) -> Result<Box<dyn ChatProvider>, ProviderError> {
    build_chat_provider_with(cfg, &env_lookup)
}

pub fn build_chat_provider_with(
    cfg: &ProviderConfig,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<Box<dyn ChatProvider>, ProviderError> {
    cfg.params().validate()?;
    check_env_name(cfg.api_key_env.as_deref())?;
    let policy = cfg.retry_policy();
    let client = HttpClient::new(policy.timeout);
    let provider: Box<dyn ChatProvider> = match cfg.kind {
        ProviderKind::Openai | ProviderKind::OpenaiCompatible => {
            let hosted = cfg.kind == ProviderKind::Openai;
            let key = key_from(
                cfg.api_key_env.as_deref(),
                hosted.then_some(OPENAI_KEY_ENV),
                hosted || cfg.api_key_env.is_some(),
                lookup,
            )?;
            let endpoint = match (&cfg.endpoint, hosted) {
                (Some(e), _) => e.clone(),
                (None, true) => OPENAI_ENDPOINT.to_owned(),
                (None, false) => {
                    return Err(ProviderError::Config(
                        "openai-compatible provider needs an endpoint".into(),
                    ))
                }
            };
            let chat = OpenAiChat::new(client, endpoint, key)
                .merge_system(cfg.merge_system_into_user)
                .with_context_window(cfg.context_tokens);
            Box::new(Retrying::new(chat, policy))
        }
        ProviderKind::Gemini => {
            let key = key_from(cfg.api_key_env.as_deref(), Some(GEMINI_KEY_ENV), true, lookup)?
                .expect("required key present");
            let endpoint = cfg.endpoint.clone().unwrap_or_else(|| GEMINI_ENDPOINT.to_owned());
            let chat = GeminiChat::new(client, endpoint, key).with_context_window(cfg.context_tokens);
            Box::new(Retrying::new(chat, policy))
        }
    };
    Ok(provider)
}

pub const DEFAULT_HASH_DIM: usize = 64;

pub fn build_embedder(cfg: &EmbedderConfig) -> Result<Box<dyn Embedder>, ProviderError> {
    build_embedder_with(cfg, &env_lookup)
}

pub fn build_embedder_with(
    cfg: &EmbedderConfig,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<Box<dyn Embedder>, ProviderError> {
    check_env_name(cfg.api_key_env.as_deref())?;
    let policy = RetryPolicy::default();
    match cfg.kind {
        EmbedderKind::Hash => Ok(Box::new(HashEmbedder::new(
            &cfg.model_name,
            cfg.dim.unwrap_or(DEFAULT_HASH_DIM).max(1),
        ))),
        EmbedderKind::Openai | EmbedderKind::OpenaiCompatible => {
            let hosted = cfg.kind == EmbedderKind::Openai;
            let key = key_from(
                cfg.api_key_env.as_deref(),
                hosted.then_some(OPENAI_KEY_ENV),
                hosted || cfg.api_key_env.is_some(),
                lookup,
            )?;
            let endpoint = match (&cfg.endpoint, hosted) {
                (Some(e), _) => e.clone(),
                (None, true) => OPENAI_ENDPOINT.to_owned(),
                (None, false) => {
                    return Err(ProviderError::Config(
                        "openai-compatible embedder needs an endpoint".into(),
                    ))
                }
            };
            let embedder =
                OpenAiEmbedder::new(HttpClient::new(policy.timeout), endpoint, key, &cfg.model_name);
            Ok(Box::new(Retrying::new(embedder, policy)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"
[provider]
kind = "gemini"
model_name = "gemini-pro"
context_tokens = 30720

[embedder]
kind = "hash"
model_name = "mock"
dim = 16
"#;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn parses_file() {
        let f = ConfigFile::from_toml(FILE).unwrap();
        let p = f.provider.unwrap();
        assert_eq!(p.kind, ProviderKind::Gemini);
        assert_eq!(p.params().max_new_tokens, 400);
        assert_eq!(p.params().temperature, None);
        assert_eq!(f.embedder.unwrap().dim, Some(16));
    }

    #[test]
    fn missing_credentials_is_config_error() {
        let p = ConfigFile::from_toml(FILE).unwrap().provider.unwrap();
        assert!(matches!(
            build_chat_provider_with(&p, &no_env),
            Err(ProviderError::Config(_))
        ));
        let with_key = |v: &str| (v == GEMINI_KEY_ENV).then(|| "k".to_owned());
        let built = build_chat_provider_with(&p, &with_key).unwrap();
        assert_eq!(built.context_window(), Some(30720));
    }

    #[test]
    fn compatible_server_needs_no_key() {
        let p = ProviderConfig {
            kind: ProviderKind::OpenaiCompatible,
            model_name: "mistral-7b-instruct".into(),
            endpoint: Some("http://localhost:8000/v1".into()),
            preset: ParamsPreset::Mistral,
            max_new_tokens: None,
            context_tokens: None,
            api_key_env: None,
            merge_system_into_user: true,
            max_attempts: None,
            timeout_secs: None,
        };
        build_chat_provider_with(&p, &no_env).unwrap();
        let no_endpoint = ProviderConfig { endpoint: None, ..p };
        assert!(build_chat_provider_with(&no_endpoint, &no_env).is_err());
    }

    #[test]
    fn literal_keys_rejected() {
        let text = FILE.replace("context_tokens = 30720", "api_key_env = \"sk-abc123\"");
        assert!(matches!(
            ConfigFile::from_toml(&text),
            Err(ProviderError::Config(_))
        ));
        assert!(ConfigFile::from_toml(
            "[provider]\nkind = \"gemini\"\nmodel_name = \"m\"\napi_key = \"x\"\n"
        )
        .is_err());
    }

    #[test]
    fn hash_embedder_offline() {
        let e = ConfigFile::from_toml(FILE).unwrap().embedder.unwrap();
        let built = build_embedder_with(&e, &no_env).unwrap();
        assert_eq!(built.embed("x").unwrap().dim(), 16);
    }
}
