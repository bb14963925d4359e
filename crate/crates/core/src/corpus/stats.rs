use serde::{Deserialize, Serialize};

use super::{ClaimPair, CorpusError, Label};

/// Size and length summary of a claim-pair corpus. Lengths are measured on
/// preprocessed text: characters are Unicode scalar values, tokens are
/// whitespace-separated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_pairs: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub mean_chars_input: f64,
    pub mean_chars_verified: f64,
    pub mean_tokens_input: f64,
    pub mean_tokens_verified: f64,
}

pub fn corpus_stats(pairs: &[ClaimPair]) -> Result<CorpusStats, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&ClaimPair) -> usize| pairs.iter().map(f).sum::<usize>() as f64 / n;
    let n_positive = pairs.iter().filter(|p| p.label == Label::Match).count();
    Ok(CorpusStats {
        n_pairs: pairs.len(),
        n_positive,
        n_negative: pairs.len() - n_positive,
        mean_chars_input: mean(&|p| p.input_claim.chars().count()),
        mean_chars_verified: mean(&|p| p.verified_claim.chars().count()),
        mean_tokens_input: mean(&|p| p.input_claim.split_whitespace().count()),
        mean_tokens_verified: mean(&|p| p.verified_claim.split_whitespace().count()),
    })
}
