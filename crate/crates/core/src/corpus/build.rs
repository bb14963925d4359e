use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    dedup_near_duplicates, generate_negative_pairs, preprocess_text, validate_pairs, ClaimKind, ClaimPair,
    CorpusError, Label, RawClaim, Split, VerifiedClaimSource,
};

/// One line of a raw-claims file: either `{"id","kind","text"}` or a
/// fact-check article `{"id","kind","title","subtitle","body"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawClaimRecord {
    pub id: String,
    pub kind: ClaimKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtitle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

impl RawClaimRecord {
    pub fn into_raw_claim(self) -> Result<RawClaim, CorpusError> {
        let text = match self.text {
            Some(text) => text,
            None => VerifiedClaimSource {
                title: self.title.unwrap_or_default(),
                subtitle: self.subtitle.unwrap_or_default(),
                body: self.body.unwrap_or_default(),
            }
            .compose()?,
        };
        if self.id.is_empty() {
            return Err(CorpusError::InvalidOption("claim with empty id".into()));
        }
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText { id: self.id });
        }
        Ok(RawClaim {
            id: self.id,
            kind: self.kind,
            text,
        })
    }
}

/// A gold positive link between an input claim and a verified claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLink {
    pub input_id: String,
    pub verified_id: String,
}

pub fn load_raw_claims(path: &Path) -> Result<Vec<RawClaim>, CorpusError> {
    let records: Vec<RawClaimRecord> = crate::jsonl::read(path)?;
    let claims = records
        .into_iter()
        .map(RawClaimRecord::into_raw_claim)
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    if let Some(dup) = claims.iter().find(|c| !seen.insert(c.id.as_str())) {
        return Err(CorpusError::DuplicateId(dup.id.clone()));
    }
    Ok(claims)
}

/// Builds preprocessed positive pairs from gold links.
pub fn positive_pairs(
    links: &[GoldLink],
    claims: &[RawClaim],
    split: Split,
) -> Result<Vec<ClaimPair>, CorpusError> {
    let by_id: HashMap<&str, &RawClaim> = claims.iter().map(|c| (c.id.as_str(), c)).collect();
    let lookup = |id: &str, expected: ClaimKind| -> Result<&RawClaim, CorpusError> {
        let claim = by_id
            .get(id)
            .ok_or_else(|| CorpusError::UnknownClaim(id.to_owned()))?;
        if claim.kind != expected {
            return Err(CorpusError::WrongKind {
                id: id.to_owned(),
                expected,
                found: claim.kind,
            });
        }
        Ok(claim)
    };
    let pairs = links
        .iter()
        .map(|link| {
            let input = lookup(&link.input_id, ClaimKind::InputClaim)?;
            let verified = lookup(&link.verified_id, ClaimKind::VerifiedClaim)?;
            Ok(ClaimPair {
                pair_id: format!("pos-{}-{}", input.id, verified.id),
                input_claim: preprocess_text(&input.text),
                verified_claim: preprocess_text(&verified.text),
                label: Label::Match,
                source_ids: (input.id.clone(), verified.id.clone()),
                split,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    validate_pairs(&pairs)?;
    Ok(pairs)
}

/// Seeded sample of `n` pairs; the sample keeps the input order.
pub fn sample_pairs(pairs: Vec<ClaimPair>, n: usize, seed: u64) -> Vec<ClaimPair> {
    if n >= pairs.len() {
        return pairs;
    }
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = idx[..n].to_vec();
    keep.sort_unstable();
    let keep: HashSet<usize> = keep.into_iter().collect();
    pairs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, p)| p)
        .collect()
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub seed: u64,
    pub split: Split,
    /// Random pre-sample of positive links taken before deduplication.
    pub pre_sample: Option<usize>,
    /// Near-duplicate filter on positive pairs (`ratio > max` removed).
    pub dedup_ratio: Option<f64>,
    /// Final number of positives; the same number of negatives is generated.
    pub n_positives: Option<usize>,
    /// Claim ids that must not appear anywhere in the output (e.g. claims
    /// already used by a test set when building few-shot examples).
    pub exclude_ids: HashSet<String>,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            split: Split::Test,
            pre_sample: None,
            dedup_ratio: None,
            n_positives: None,
            exclude_ids: HashSet::new(),
        }
    }
}

/// Positives from gold links (sampled, deduplicated) plus an equal number of
/// generated negatives, positives first.
pub fn build_dataset(
    claims: &[RawClaim],
    links: &[GoldLink],
    opts: &DatasetOptions,
) -> Result<Vec<ClaimPair>, CorpusError> {
    if let Some(r) = opts.dedup_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(CorpusError::InvalidOption(format!(
                "dedup ratio must be in (0, 1), got {r}"
            )));
        }
    }
    let links: Vec<GoldLink> = links
        .iter()
        .filter(|l| !opts.exclude_ids.contains(&l.input_id) && !opts.exclude_ids.contains(&l.verified_id))
        .cloned()
        .collect();
    let mut positives = positive_pairs(&links, claims, opts.split)?;
    if let Some(n) = opts.pre_sample {
        positives = sample_pairs(positives, n, opts.seed);
    }
    if let Some(r) = opts.dedup_ratio {
        positives = dedup_near_duplicates(positives, r);
    }
    if let Some(n) = opts.n_positives {
        if n > positives.len() {
            return Err(CorpusError::InvalidOption(format!(
                "requested {n} positives but only {} remain",
                positives.len()
            )));
        }
        // Distinct stream from the pre-sample.
        positives = sample_pairs(positives, n, opts.seed.wrapping_add(1));
    }
    let pool: Vec<RawClaim> = claims
        .iter()
        .filter(|c| c.kind == ClaimKind::VerifiedClaim && !opts.exclude_ids.contains(&c.id))
        .cloned()
        .collect();
    let negatives = generate_negative_pairs(&positives, &pool, opts.seed)?;
    let mut out = positives;
    out.extend(negatives);
    validate_pairs(&out)?;
    Ok(out)
}
