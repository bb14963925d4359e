use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sorted_test_pairs, RunConfig, RunnerError, ShotMode};
use crate::corpus::ClaimPair;
use crate::metrics::{compute_metrics, MetricsReport};
use crate::parsing::{parse_response, relabel_same_event, Prediction, RelabelRules};
use crate::provider::{
    ChatProvider, PromptRequest, ProviderError, ProviderResponse, RecordingProvider, ResponseStatus,
    TranscriptEntry,
};
use crate::templates::{compose_instructions, render_few_shot, FewShotSet, LabelWords, TemplateRegistry};

/// A pair skipped in lenient mode because its request failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub status: ResponseStatus,
    pub message: String,
}

impl PairFailure {
    pub fn new(pair_id: &str, error: &ProviderError) -> Self {
        Self {
            pair_id: pair_id.to_owned(),
            status: error.status(),
            message: error.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Sorted by pair id.
    pub predictions: Vec<Prediction>,
    pub metrics: MetricsReport,
    /// One entry per request sent, sorted by request id.
    pub transcript: Vec<TranscriptEntry>,
    pub excluded: Vec<PairFailure>,
}

/// Rough token count: a quarter of the characters, rounded up, plus the
/// generation budget.
pub fn estimate_tokens(req: &PromptRequest) -> usize {
    let chars = req.system_text.chars().count() + req.user_text.chars().count();
    chars.div_ceil(4) + req.params.max_new_tokens as usize
}

fn effective_shots<'a>(
    cfg: &RunConfig,
    shots: &'a FewShotSet,
    empty: &'a FewShotSet,
) -> Result<&'a FewShotSet, RunnerError> {
    match cfg.shot_mode {
        ShotMode::Zero => Ok(empty),
        ShotMode::Few if shots.is_empty() => {
            Err(RunnerError::Config("few-shot run without shot examples".into()))
        }
        ShotMode::Few => Ok(shots),
    }
}

fn check_disjoint(pairs: &[ClaimPair], shots: &FewShotSet) -> Result<(), RunnerError> {
    let pair_ids: HashSet<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();
    let input_ids: HashSet<&str> = pairs.iter().map(|p| p.input_id()).collect();
    match shots
        .examples()
        .iter()
        .find(|s| pair_ids.contains(s.pair_id.as_str()) || input_ids.contains(s.input_id()))
    {
        Some(s) => Err(RunnerError::ShotLeak(s.pair_id.clone())),
        None => Ok(()),
    }
}

/// Renders one request per pair (in the given order) and returns the label
/// words the answers will be parsed with.
pub fn build_requests(
    cfg: &RunConfig,
    pairs: &[ClaimPair],
    shots: &FewShotSet,
    registry: &TemplateRegistry,
) -> Result<(Vec<PromptRequest>, LabelWords), RunnerError> {
    let empty = FewShotSet::empty();
    let shots = effective_shots(cfg, shots, &empty)?;
    check_disjoint(pairs, shots)?;
    let mode = cfg.instruction_mode();
    let template = registry.get(cfg.template_user)?;
    let mut words = template.label_words.clone();
    let requests = pairs
        .iter()
        .map(|pair| {
            let user = render_few_shot(template, shots, pair, cfg.question_position)?;
            let prompt = compose_instructions(&mode, user, registry)?;
            words = prompt.expected_labels;
            Ok(PromptRequest {
                request_id: pair.pair_id.clone(),
                system_text: prompt.system_text,
                user_text: prompt.user_text,
                params: cfg.params.clone(),
            })
        })
        .collect::<Result<Vec<_>, RunnerError>>()?;
    Ok((requests, words))
}

/// Renders, completes, parses and scores every test pair.
///
/// All validation (split, shot leakage, context size) happens before the
/// first request. Requests run on `cfg.concurrency` threads; results are
/// processed in pair-id order, so outputs do not depend on timing.
pub fn run_experiment(
    cfg: &RunConfig,
    dataset: &[ClaimPair],
    shots: &FewShotSet,
    registry: &TemplateRegistry,
    provider: &dyn ChatProvider,
) -> Result<RunOutcome, RunnerError> {
    cfg.validate()?;
    let pairs = sorted_test_pairs(dataset)?;
    let (requests, words) = build_requests(cfg, &pairs, shots, registry)?;
    if let Some(window) = provider.context_window() {
        for req in &requests {
            let needed = estimate_tokens(req);
            if needed > window {
                return Err(RunnerError::ContextOverflow {
                    pair_id: req.request_id.clone(),
                    needed,
                    window,
                });
            }
        }
    }
    tracing::info!(run_id = %cfg.run_id, pairs = pairs.len(), template = %cfg.template_label(), mode = %cfg.mode_label(), "starting run");

    let recorder = RecordingProvider::new(provider);
    let abort = AtomicBool::new(false);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency)
        .build()
        .map_err(|e| RunnerError::Config(format!("thread pool: {e}")))?;
    let responses: Vec<Option<Result<ProviderResponse, ProviderError>>> = pool.install(|| {
        requests
            .par_iter()
            .map(|req| {
                if abort.load(Ordering::Relaxed) {
                    return None;
                }
                let result = recorder.complete(req);
                if let Err(e) = &result {
                    tracing::warn!(pair_id = %req.request_id, error = %e, "request failed");
                    if !cfg.lenient {
                        abort.store(true, Ordering::Relaxed);
                    }
                }
                Some(result)
            })
            .collect()
    });

    let rules = cfg.relabel.then(RelabelRules::builtin);
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut scored = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    let mut aborted = false;
    for (pair, response) in pairs.iter().zip(responses) {
        match response {
            Some(Ok(resp)) => {
                let mut pred = parse_response(&pair.pair_id, &resp.raw_text, &words);
                if let Some(rules) = &rules {
                    pred = relabel_same_event(pred, rules);
                }
                predictions.push(pred);
                scored.push(pair.clone());
            }
            Some(Err(source)) if cfg.lenient => excluded.push(PairFailure::new(&pair.pair_id, &source)),
            Some(Err(source)) => {
                return Err(RunnerError::Provider {
                    pair_id: pair.pair_id.clone(),
                    source,
                })
            }
            None => aborted = true,
        }
    }
    // Skipped pairs imply a failure, which the loop above reports first.
    if aborted {
        return Err(RunnerError::Config("run aborted after a provider failure".into()));
    }
    if let (true, Some(first)) = (predictions.is_empty(), excluded.first()) {
        return Err(RunnerError::Provider {
            pair_id: first.pair_id.clone(),
            source: ProviderError::Failed("every request failed; nothing to score".into()),
        });
    }
    let metrics = compute_metrics(&predictions, &scored)?;
    tracing::info!(run_id = %cfg.run_id, f1 = metrics.f1_weighted, accuracy = metrics.accuracy, excluded = excluded.len(), "run finished");
    Ok(RunOutcome {
        predictions,
        metrics,
        transcript: recorder.entries(),
        excluded,
    })
}
