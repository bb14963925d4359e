//! Claim-pair dataset construction.
//!
//! Raw claims (tweets and fact-check articles) are preprocessed, linked into
//! positive pairs from gold links, complemented with generated negative pairs,
//! optionally filtered for near-duplicates, and persisted as JSONL.

mod build;
mod dedup;
mod negatives;
mod preprocess;
mod stats;

use serde::{Deserialize, Serialize};

pub use build::{
    build_dataset, load_raw_claims, positive_pairs, sample_pairs, DatasetOptions, GoldLink, RawClaimRecord,
};
pub use dedup::{dedup_near_duplicates, levenshtein_distance, levenshtein_ratio};
pub use negatives::generate_negative_pairs;
pub use preprocess::preprocess_text;
pub use stats::{corpus_stats, CorpusStats};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("verified claim source has no nonempty title, subtitle or body")]
    AllPartsEmpty,
    #[error("cannot assign a distinct non-paired verified claim to input claim {input_id}")]
    InsufficientPool { input_id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("claim {id} is empty after preprocessing")]
    EmptyText { id: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("unknown claim id {0}")]
    UnknownClaim(String),
    #[error("claim {id} has kind {found:?}, expected {expected:?}")]
    WrongKind {
        id: String,
        expected: ClaimKind,
        found: ClaimKind,
    },
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    InputClaim,
    VerifiedClaim,
}

/// A claim as collected, before preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawClaim {
    pub id: String,
    pub kind: ClaimKind,
    pub text: String,
}

/// The parts of a fact-check article that make up a verified claim.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedClaimSource {
    pub title: String,
    #[serde(default)]
    pub subtitle: String,
    #[serde(default)]
    pub body: String,
}

impl VerifiedClaimSource {
    /// Title, subtitle and body joined by single spaces, empty parts skipped,
    /// then preprocessed.
    pub fn compose(&self) -> Result<String, CorpusError> {
        let parts: Vec<&str> = [&self.title, &self.subtitle, &self.body]
            .into_iter()
            .map(|p| p.trim())
            .filter(|p| !p.is_empty())
            .collect();
        if parts.is_empty() {
            return Err(CorpusError::AllPartsEmpty);
        }
        Ok(preprocess_text(&parts.join(" ")))
    }
}

/// Free-function form of [`VerifiedClaimSource::compose`].
pub fn compose_verified_text(src: &VerifiedClaimSource) -> Result<String, CorpusError> {
    src.compose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Match,
    NoMatch,
}

impl Label {
    pub fn is_match(self) -> bool {
        self == Label::Match
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Match => Label::NoMatch,
            Label::NoMatch => Label::Match,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TrainShots,
    Validation,
    Test,
}

impl std::str::FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train_shots" => Ok(Split::TrainShots),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::InvalidOption(format!("unknown split {other:?}"))),
        }
    }
}

/// An (input claim, verified claim) pair with its gold label. Texts are
/// already preprocessed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimPair {
    pub pair_id: String,
    pub input_claim: String,
    pub verified_claim: String,
    pub label: Label,
    /// (input claim id, verified claim id)
    pub source_ids: (String, String),
    pub split: Split,
}

impl ClaimPair {
    pub fn input_id(&self) -> &str {
        &self.source_ids.0
    }

    pub fn verified_id(&self) -> &str {
        &self.source_ids.1
    }
}

/// Checks pair-level invariants: nonempty texts and unique pair ids.
pub fn validate_pairs(pairs: &[ClaimPair]) -> Result<(), CorpusError> {
    let mut seen = std::collections::HashSet::new();
    for pair in pairs {
        if pair.input_claim.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                id: pair.source_ids.0.clone(),
            });
        }
        if pair.verified_claim.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                id: pair.source_ids.1.clone(),
            });
        }
        if !seen.insert(pair.pair_id.as_str()) {
            return Err(CorpusError::DuplicateId(pair.pair_id.clone()));
        }
    }
    Ok(())
}
