//! Record/replay of chat requests as JSONL transcripts.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, PromptRequest, ProviderError, ProviderResponse, ResponseStatus};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_id: String,
    pub request_sha256: String,
    pub raw_text: String,
    pub latency_ms: u64,
    pub status: ResponseStatus,
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, ProviderError> {
    Ok(jsonl::read(path)?)
}

/// Writes entries sorted by request id.
pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> Result<(), ProviderError> {
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| a.request_id.cmp(&b.request_id));
    Ok(jsonl::write(path, &sorted)?)
}

/// Answers from a transcript and never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    entries: HashMap<String, TranscriptEntry>,
    context_window: Option<usize>,
}

impl ReplayProvider {
    pub fn new(entries: Vec<TranscriptEntry>) -> Result<Self, ProviderError> {
        let mut map = HashMap::with_capacity(entries.len());
        for e in entries {
            let id = e.request_id.clone();
            if map.insert(id.clone(), e).is_some() {
                return Err(ProviderError::Config(format!("transcript repeats request {id}")));
            }
        }
        Ok(Self {
            entries: map,
            context_window: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        Self::new(read_transcript(path)?)
    }

    pub fn with_context_window(mut self, tokens: Option<usize>) -> Self {
        self.context_window = tokens;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        let entry = self
            .entries
            .get(&req.request_id)
            .ok_or_else(|| ProviderError::MissingRecord(req.request_id.clone()))?;
        let actual = req.sha256();
        if entry.request_sha256 != actual {
            return Err(ProviderError::TranscriptMismatch {
                request_id: req.request_id.clone(),
                recorded: entry.request_sha256.clone(),
                actual,
            });
        }
        if entry.status != ResponseStatus::Ok {
            return Err(ProviderError::RecordedFailure {
                request_id: req.request_id.clone(),
                status: entry.status,
            });
        }
        Ok(ProviderResponse::ok(entry.raw_text.clone(), entry.latency_ms))
    }

    fn context_window(&self) -> Option<usize> {
        self.context_window
    }
}

/// Passes requests through and keeps a transcript entry for each, including
/// failed ones.
#[derive(Debug)]
pub struct RecordingProvider<P> {
    inner: P,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<P> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            entries: Mutex::new(Vec::new()),
        }
    }

    /// Entries recorded so far, sorted by request id.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        let mut out = self.entries.lock().expect("transcript lock").clone();
        out.sort_by(|a, b| a.request_id.cmp(&b.request_id));
        out
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        let started = std::time::Instant::now();
        let result = self.inner.complete(req);
        let entry = match &result {
            Ok(resp) => TranscriptEntry {
                request_id: req.request_id.clone(),
                request_sha256: req.sha256(),
                raw_text: resp.raw_text.clone(),
                latency_ms: resp.latency_ms,
                status: ResponseStatus::Ok,
            },
            Err(e) => TranscriptEntry {
                request_id: req.request_id.clone(),
                request_sha256: req.sha256(),
                raw_text: String::new(),
                latency_ms: started.elapsed().as_millis() as u64,
                status: e.status(),
            },
        };
        self.entries.lock().expect("transcript lock").push(entry);
        result
    }

    fn context_window(&self) -> Option<usize> {
        self.inner.context_window()
    }
}
