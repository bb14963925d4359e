//! Mapping library errors onto exit codes.

use claimmatch::baseline::BaselineError;
use claimmatch::corpus::CorpusError;
use claimmatch::jsonl::JsonlError;
use claimmatch::metrics::MetricsError;
use claimmatch::provider::ProviderError;
use claimmatch::runner::{ErrorClass, RunnerError};
use claimmatch::templates::TemplateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Config,
    Provider,
    Data,
}

impl Class {
    pub fn code(self) -> u8 {
        match self {
            Class::Config => 2,
            Class::Provider => 3,
            Class::Data => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(msg: impl std::fmt::Display) -> Self {
        Self {
            class: Class::Config,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        Self {
            class: Class::Data,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn provider(msg: impl std::fmt::Display) -> Self {
        Self {
            class: Class::Provider,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    fn new(class: Class, e: impl std::error::Error + Send + Sync + 'static) -> Self {
        Self {
            class,
            error: e.into(),
        }
    }
}

impl From<RunnerError> for Failure {
    fn from(e: RunnerError) -> Self {
        let class = match e.class() {
            ErrorClass::Config => Class::Config,
            ErrorClass::Provider => Class::Provider,
            ErrorClass::Data => Class::Data,
        };
        Self::new(class, e)
    }
}

impl From<ProviderError> for Failure {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Config(_) => Self::new(Class::Config, e),
            ProviderError::Transcript(_) => Self::new(Class::Data, e),
            _ => Self::new(Class::Provider, e),
        }
    }
}

impl From<BaselineError> for Failure {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Provider(p) => p.into(),
            BaselineError::ModelMismatch { .. } => Self::new(Class::Config, e),
            _ => Self::new(Class::Data, e),
        }
    }
}

impl From<TemplateError> for Failure {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::UnknownTemplate(_) | TemplateError::Manifest(_) => Self::new(Class::Config, e),
            _ => Self::new(Class::Data, e),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidOption(_) => Self::new(Class::Config, e),
            _ => Self::new(Class::Data, e),
        }
    }
}

impl From<JsonlError> for Failure {
    fn from(e: JsonlError) -> Self {
        Self::new(Class::Data, e)
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Self::new(Class::Data, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(Class::Data, e)
    }
}
