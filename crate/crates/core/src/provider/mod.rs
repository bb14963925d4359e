//! Chat-completion and embedding services behind provider-agnostic traits.
//!
//! Everything that touches the network lives in [`http`]. The runner only sees
//! [`ChatProvider`] and [`Embedder`]; offline runs use [`ReplayProvider`] or
//! the mocks in [`mock`].

pub mod config;
pub mod http;
pub mod mock;
mod retry;
mod transcript;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

pub use config::{
    build_chat_provider, build_embedder, ConfigFile, EmbedderConfig, EmbedderKind, ProviderConfig,
    ProviderKind,
};
pub use retry::{with_retry, RetryPolicy, Retrying};
pub use transcript::{read_transcript, write_transcript, RecordingProvider, ReplayProvider, TranscriptEntry};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot embed empty text")]
    EmptyText,
    /// A single attempt failed in a way worth retrying.
    #[error("{status}: {message}")]
    Transient { status: ResponseStatus, message: String },
    #[error("gave up after {attempts} attempts ({status}): {message}")]
    RetriesExhausted {
        attempts: u32,
        status: ResponseStatus,
        message: String,
    },
    #[error("provider error: {0}")]
    Failed(String),
    #[error("no recorded response for request {0}")]
    MissingRecord(String),
    #[error("request {request_id} differs from the recorded one (recorded {recorded}, now {actual})")]
    TranscriptMismatch {
        request_id: String,
        recorded: String,
        actual: String,
    },
    #[error("recorded request {request_id} ended with {status}")]
    RecordedFailure {
        request_id: String,
        status: ResponseStatus,
    },
    #[error("transcript: {0}")]
    Transcript(#[from] crate::jsonl::JsonlError),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transient { status, .. } if status.is_retryable())
    }

    /// The status a transcript records for this failure.
    pub fn status(&self) -> ResponseStatus {
        match self {
            ProviderError::Transient { status, .. }
            | ProviderError::RetriesExhausted { status, .. }
            | ProviderError::RecordedFailure { status, .. } => *status,
            _ => ResponseStatus::ProviderError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    RateLimited,
    ProviderError,
    Timeout,
}

impl ResponseStatus {
    pub fn is_retryable(self) -> bool {
        matches!(self, ResponseStatus::RateLimited | ResponseStatus::Timeout)
    }
}

impl std::fmt::Display for ResponseStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResponseStatus::Ok => "ok",
            ResponseStatus::RateLimited => "rate_limited",
            ResponseStatus::ProviderError => "provider_error",
            ResponseStatus::Timeout => "timeout",
        })
    }
}

/// Named sampling configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamsPreset {
    /// temperature 0.6, top_p 0.9, 400 new tokens.
    Llama,
    /// 400 new tokens, sampling left to the server.
    Mistral,
    /// 400 new tokens, vendor-default sampling.
    #[default]
    ApiDefault,
}

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 400;

/// Unset sampling fields are omitted from the wire request so the vendor's
/// defaults apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model_name: String,
    pub max_new_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
}

impl GenerationParams {
    pub fn preset(preset: ParamsPreset, model_name: impl Into<String>) -> Self {
        let (temperature, top_p) = match preset {
            ParamsPreset::Llama => (Some(0.6), Some(0.9)),
            ParamsPreset::Mistral | ParamsPreset::ApiDefault => (None, None),
        };
        Self {
            model_name: model_name.into(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            temperature,
            top_p,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.max_new_tokens == 0 {
            return Err(ProviderError::Config("max_new_tokens must be positive".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(ProviderError::Config("model_name is empty".into()));
        }
        if let Some(t) = self.temperature {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ProviderError::Config(format!("temperature {t} must be >= 0")));
            }
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ProviderError::Config(format!("top_p {p} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub request_id: String,
    pub system_text: String,
    pub user_text: String,
    pub params: GenerationParams,
}

#[derive(Serialize)]
struct HashedRequest<'a> {
    system_text: &'a str,
    user_text: &'a str,
    params: &'a GenerationParams,
}

impl PromptRequest {
    /// SHA-256 over the canonical JSON of system text, user text and params.
    /// The request id is deliberately excluded.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(&HashedRequest {
            system_text: &self.system_text,
            user_text: &self.user_text,
            params: &self.params,
        })
        .expect("request serializes");
        sha256_hex(canonical)
    }
}

/// A completed request. Failures are reported as [`ProviderError`], so
/// `status` is `Ok` on every response a provider returns; the other statuses
/// show up in transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub raw_text: String,
    pub latency_ms: u64,
    pub status: ResponseStatus,
    pub attempts: u32,
}

impl ProviderResponse {
    pub fn ok(raw_text: impl Into<String>, latency_ms: u64) -> Self {
        Self {
            raw_text: raw_text.into(),
            latency_ms,
            status: ResponseStatus::Ok,
            attempts: 1,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError>;

    /// Declared context size in tokens, if known.
    fn context_window(&self) -> Option<usize> {
        None
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(req)
    }

    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(req)
    }

    fn context_window(&self) -> Option<usize> {
        (**self).context_window()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    model_name: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_name: impl Into<String>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::Failed("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Failed("embedding has non-finite entries".into()));
        }
        Ok(Self {
            values,
            model_name: model_name.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }
}

pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        (**self).embed(text)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        (**self).embed(text)
    }
}
