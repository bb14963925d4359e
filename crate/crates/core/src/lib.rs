//! Claim matching as binary classification over claim pairs.
//!
//! The crate is organised as a batch pipeline:
//!
//! - [`corpus`] builds and validates claim-pair datasets (preprocessing,
//!   negative-pair generation, near-duplicate filtering, statistics).
//! - [`templates`] holds the prompt-template registry and renders zero- and
//!   few-shot prompts, single or ensemble instructions.
//! - [`provider`] is the only module that talks to the network: chat and
//!   embedding clients, retry, and the record/replay transcript layer.
//! - [`parsing`] maps raw model answers to `Match`/`NoMatch`.
//! - [`baseline`] is the cosine-similarity classifier with a median threshold.
//! - [`metrics`] computes weighted F1, accuracy and weighted precision/recall.
//! - [`runner`] orchestrates experiments, sweeps and the long-text pipeline.

pub mod baseline;
pub mod corpus;
pub mod digest;
pub mod jsonl;
pub mod metrics;
pub mod parsing;
pub mod provider;
pub mod runner;
pub mod templates;

pub use corpus::{ClaimPair, Label, Split};
pub use metrics::MetricsReport;
pub use parsing::{ParseStatus, Prediction};
