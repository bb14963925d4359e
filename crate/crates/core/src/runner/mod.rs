//! Experiment orchestration: render, complete, parse, score, persist.
//!
//! A run is fully described by its [`RunConfig`] plus the content hashes of
//! its inputs, which are written to `results/<run_id>/manifest.json` next to
//! the predictions, metrics and transcript.

mod artifacts;
mod experiment;
mod sweep;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClaimPair, CorpusError};
use crate::jsonl::JsonlError;
use crate::metrics::MetricsError;
use crate::provider::{GenerationParams, ProviderError};
use crate::templates::{InstructionMode, QuestionPosition, TemplateError, TemplateId};

pub use artifacts::{
    build_manifest, dataset_sha256, execute_run, load_manifest, replay_from_manifest, write_run, InputRef,
    RunInputs, RunManifest, ShotFile, ShotPool, MANIFEST_FILE, METRICS_FILE, PREDICTIONS_FILE,
    TRANSCRIPT_FILE,
};
pub use experiment::{build_requests, estimate_tokens, run_experiment, PairFailure, RunOutcome};
pub use sweep::{
    long_text_pipeline, sweep, sweep_grid, ProviderFactory, SweepCell, SweepFailure, SweepOutcome,
};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("prompt for pair {pair_id} needs about {needed} tokens but the context window is {window}")]
    ContextOverflow {
        pair_id: String,
        needed: usize,
        window: usize,
    },
    #[error("few-shot example {0} overlaps the test set")]
    ShotLeak(String),
    #[error("pair {0} is not in the test split")]
    NotTestSplit(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("pair {pair_id}: {source}")]
    Provider {
        pair_id: String,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    ProviderSetup(#[from] ProviderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run manifest: {0}")]
    Manifest(String),
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Provider,
    Data,
}

impl RunnerError {
    pub fn class(&self) -> ErrorClass {
        match self {
            RunnerError::Config(_) => ErrorClass::Config,
            RunnerError::Template(TemplateError::UnknownTemplate(_) | TemplateError::Manifest(_)) => {
                ErrorClass::Config
            }
            RunnerError::ProviderSetup(ProviderError::Config(_)) => ErrorClass::Config,
            RunnerError::Provider { .. } | RunnerError::ProviderSetup(_) => ErrorClass::Provider,
            _ => ErrorClass::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Zero,
    Few,
}

impl ShotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShotMode::Zero => "zero",
            ShotMode::Few => "few",
        }
    }
}

impl std::str::FromStr for ShotMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "zero-shot" => Ok(ShotMode::Zero),
            "few" | "few-shot" => Ok(ShotMode::Few),
            other => Err(format!("unknown shot mode {other:?} (expected zero or few)")),
        }
    }
}

/// Where few-shot examples come from. Ignored for zero-shot runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotsSource {
    /// The short-text shot set, reused on other domains.
    #[default]
    DomainIndependent,
    /// Examples drawn from the target domain.
    InDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptMode {
    #[default]
    Live,
    Record,
    Replay,
}

pub const DEFAULT_CONCURRENCY: usize = 4;

fn default_concurrency() -> usize {
    DEFAULT_CONCURRENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    /// Free-form provider label for reports, e.g. the model name.
    pub provider: String,
    pub params: GenerationParams,
    pub template_user: TemplateId,
    #[serde(default)]
    pub template_system: Option<TemplateId>,
    pub shot_mode: ShotMode,
    #[serde(default)]
    pub shots_source: ShotsSource,
    /// Orders the few-shot examples.
    pub seed: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub record_or_replay: TranscriptMode,
    #[serde(default)]
    pub transcript: Option<PathBuf>,
    #[serde(default)]
    pub relabel: bool,
    /// Skip pairs whose request failed instead of aborting; they are listed
    /// in the manifest and left out of the metrics.
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub question_position: QuestionPosition,
}

impl RunConfig {
    pub fn new(run_id: impl Into<String>, template_user: TemplateId, params: GenerationParams) -> Self {
        Self {
            run_id: run_id.into(),
            provider: params.model_name.clone(),
            params,
            template_user,
            template_system: None,
            shot_mode: ShotMode::Zero,
            shots_source: ShotsSource::DomainIndependent,
            seed: 0,
            concurrency: DEFAULT_CONCURRENCY,
            record_or_replay: TranscriptMode::Live,
            transcript: None,
            relabel: false,
            lenient: false,
            question_position: QuestionPosition::Trailing,
        }
    }

    pub fn instruction_mode(&self) -> InstructionMode {
        InstructionMode::from_parts(self.template_user, self.template_system)
    }

    /// Template label for tables: `USER` or `USER&SYSTEM`.
    pub fn template_label(&self) -> String {
        match self.template_system {
            Some(system) => format!("{}&{}", self.template_user, system),
            None => self.template_user.to_string(),
        }
    }

    /// Mode label for tables, e.g. `few/ensemble`.
    pub fn mode_label(&self) -> String {
        format!("{}/{}", self.shot_mode.as_str(), self.instruction_mode().name())
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.run_id.is_empty()
            || !self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '&' | '+'))
            || self.run_id.starts_with('.')
        {
            return Err(RunnerError::Config(format!(
                "run_id {:?} must be nonempty and use only letters, digits and -_.&+",
                self.run_id
            )));
        }
        if self.concurrency == 0 {
            return Err(RunnerError::Config("concurrency must be at least 1".into()));
        }
        if self.record_or_replay == TranscriptMode::Replay && self.transcript.is_none() {
            return Err(RunnerError::Config("replay needs a transcript path".into()));
        }
        self.params.validate()?;
        Ok(())
    }
}

/// Test pairs sorted by id, after checking they all belong to the test split
/// and ids are unique.
pub(crate) fn sorted_test_pairs(dataset: &[ClaimPair]) -> Result<Vec<ClaimPair>, RunnerError> {
    if let Some(p) = dataset.iter().find(|p| p.split != crate::corpus::Split::Test) {
        return Err(RunnerError::NotTestSplit(p.pair_id.clone()));
    }
    crate::corpus::validate_pairs(dataset)?;
    let mut pairs = dataset.to_vec();
    pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ParamsPreset;

    fn cfg() -> RunConfig {
        RunConfig::new(
            "r1",
            TemplateId::Pd6,
            GenerationParams::preset(ParamsPreset::ApiDefault, "m"),
        )
    }

    #[test]
    fn validation() {
        cfg().validate().unwrap();
        let mut c = cfg();
        c.run_id = "../escape".into();
        assert!(matches!(c.validate(), Err(RunnerError::Config(_))));
        let mut c = cfg();
        c.record_or_replay = TranscriptMode::Replay;
        assert!(c.validate().is_err());
        c.transcript = Some("t.jsonl".into());
        c.validate().unwrap();
        let mut c = cfg();
        c.concurrency = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn labels() {
        let mut c = cfg();
        c.template_user = TemplateId::Nli5;
        c.template_system = Some(TemplateId::Pd6);
        c.shot_mode = ShotMode::Few;
        assert_eq!(c.template_label(), "NLI-5&PD-6");
        assert_eq!(c.mode_label(), "few/ensemble");
    }

    #[test]
    fn config_json_round_trip() {
        let c = cfg();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"template_user\":\"PD-6\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn error_classes() {
        assert_eq!(RunnerError::Config("x".into()).class(), ErrorClass::Config);
        assert_eq!(
            RunnerError::Provider {
                pair_id: "p".into(),
                source: ProviderError::Failed("x".into())
            }
            .class(),
            ErrorClass::Provider
        );
        assert_eq!(RunnerError::ShotLeak("p".into()).class(), ErrorClass::Data);
        assert_eq!(
            RunnerError::ProviderSetup(ProviderError::Config("no key".into())).class(),
            ErrorClass::Config
        );
    }
}
