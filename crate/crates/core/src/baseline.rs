//! Embedding-similarity classifier: a pair is a match when the cosine
//! similarity of its two claims reaches a threshold set to the median
//! similarity of positive validation pairs.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClaimPair, Label, Split};
use crate::parsing::{ParseStatus, Prediction};
use crate::provider::{Embedder, EmbeddingVector, ProviderError};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("cannot take the cosine of a zero vector")]
    ZeroVector,
    #[error("no positive validation pairs to calibrate on")]
    EmptyValidation,
    #[error("threshold was calibrated with {threshold}, embedder is {embedder}")]
    ModelMismatch { threshold: String, embedder: String },
    #[error("pair {0} is in the test split and cannot be used for calibration")]
    TestPairInValidation(String),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// `dot(a, b) / sqrt(|a|² |b|²)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, BaselineError> {
    if a.dim() != b.dim() {
        return Err(BaselineError::DimMismatch(a.dim(), b.dim()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(BaselineError::ZeroVector);
    }
    // One square root of the product keeps exact cases exact, e.g. 9/sqrt(100).
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub model_name: String,
    pub calibration_n: usize,
}

impl Threshold {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !self.value.is_finite() || !(-1.0..=1.0).contains(&self.value) {
            return Err(BaselineError::InvalidThreshold(format!("value {}", self.value)));
        }
        if self.calibration_n == 0 {
            return Err(BaselineError::InvalidThreshold("calibration_n is 0".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        let io = |source| BaselineError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("threshold serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        let text = std::fs::read_to_string(path).map_err(|source| BaselineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let t: Self =
            serde_json::from_str(&text).map_err(|e| BaselineError::InvalidThreshold(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(scores: &[f64]) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

pub fn threshold_from_scores(scores: &[f64], model_name: &str) -> Result<Threshold, BaselineError> {
    let value = median(scores).ok_or(BaselineError::EmptyValidation)?;
    let t = Threshold {
        value,
        model_name: model_name.to_owned(),
        calibration_n: scores.len(),
    };
    t.validate()?;
    Ok(t)
}

pub fn pair_similarity(pair: &ClaimPair, embedder: &dyn Embedder) -> Result<f64, BaselineError> {
    let a = embedder.embed(&pair.input_claim)?;
    let b = embedder.embed(&pair.verified_claim)?;
    cosine_similarity(&a, &b)
}

/// Calibrates on the `Match` pairs of `validation`; other pairs are ignored.
pub fn calibrate_threshold(
    validation: &[ClaimPair],
    embedder: &dyn Embedder,
) -> Result<Threshold, BaselineError> {
    if let Some(p) = validation.iter().find(|p| p.split == Split::Test) {
        return Err(BaselineError::TestPairInValidation(p.pair_id.clone()));
    }
    let scores = validation
        .par_iter()
        .filter(|p| p.label == Label::Match)
        .map(|p| pair_similarity(p, embedder))
        .collect::<Result<Vec<f64>, _>>()?;
    let t = threshold_from_scores(&scores, embedder.model_name())?;
    tracing::info!(threshold = t.value, n = t.calibration_n, model = %t.model_name, "calibrated");
    Ok(t)
}

/// Inclusive: a score equal to the threshold is a match. The score is kept in
/// `raw_text`.
pub fn classify_score(pair_id: &str, score: f64, threshold: &Threshold) -> Prediction {
    let label = if score >= threshold.value {
        Label::Match
    } else {
        Label::NoMatch
    };
    Prediction {
        pair_id: pair_id.to_owned(),
        label,
        parse_status: ParseStatus::Clean,
        matched_token: None,
        raw_text: score.to_string(),
        relabel_rule: None,
    }
}

fn check_model(threshold: &Threshold, embedder: &dyn Embedder) -> Result<(), BaselineError> {
    if threshold.model_name != embedder.model_name() {
        return Err(BaselineError::ModelMismatch {
            threshold: threshold.model_name.clone(),
            embedder: embedder.model_name().to_owned(),
        });
    }
    Ok(())
}

pub fn classify_by_similarity(
    pair: &ClaimPair,
    threshold: &Threshold,
    embedder: &dyn Embedder,
) -> Result<Prediction, BaselineError> {
    check_model(threshold, embedder)?;
    Ok(classify_score(
        &pair.pair_id,
        pair_similarity(pair, embedder)?,
        threshold,
    ))
}

/// Classifies every pair; output order follows `pairs`.
pub fn run_baseline(
    pairs: &[ClaimPair],
    threshold: &Threshold,
    embedder: &dyn Embedder,
) -> Result<Vec<Prediction>, BaselineError> {
    check_model(threshold, embedder)?;
    pairs
        .par_iter()
        .map(|p| classify_by_similarity(p, threshold, embedder))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::mock::HashEmbedder;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec(), "m").unwrap()
    }

    fn threshold(value: f64) -> Threshold {
        Threshold {
            value,
            model_name: "m".into(),
            calibration_n: 1,
        }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(
            cosine_similarity(&v(&[1.0, 2.0, 3.0]), &v(&[1.0, 2.0, 3.0])).unwrap(),
            1.0
        );
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(BaselineError::DimMismatch(1, 2))
        ));
        assert!(matches!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(BaselineError::ZeroVector)
        ));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[0.2, 0.6, 0.9]), Some(0.6));
        assert_eq!(median(&[0.8, 0.4]), Some(0.6000000000000001));
        assert!((median(&[0.4, 0.8]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(median(&[]), None);
        assert!(matches!(
            threshold_from_scores(&[], "m"),
            Err(BaselineError::EmptyValidation)
        ));
    }

    #[test]
    fn boundary_is_inclusive() {
        let t = threshold(0.63);
        assert_eq!(classify_score("p", 0.63, &t).label, Label::Match);
        let below = f64::from_bits(0.63f64.to_bits() - 1);
        assert_eq!(classify_score("p", below, &t).label, Label::NoMatch);
        let p = classify_score("p", 0.7, &t);
        assert_eq!((p.parse_status, p.matched_token), (ParseStatus::Clean, None));
    }

    #[test]
    fn model_mismatch() {
        let e = HashEmbedder::new("other", 8);
        let pair = ClaimPair {
            pair_id: "p".into(),
            input_claim: "a".into(),
            verified_claim: "b".into(),
            label: Label::Match,
            source_ids: ("i".into(), "v".into()),
            split: Split::Test,
        };
        assert!(matches!(
            classify_by_similarity(&pair, &threshold(0.5), &e),
            Err(BaselineError::ModelMismatch { .. })
        ));
        assert!(matches!(
            calibrate_threshold(std::slice::from_ref(&pair), &e),
            Err(BaselineError::TestPairInValidation(_))
        ));
    }

    #[test]
    fn threshold_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = Threshold {
            value: 0.64,
            model_name: "all-MiniLM-L6-v2".into(),
            calibration_n: 500,
        };
        t.save(&path).unwrap();
        assert_eq!(Threshold::load(&path).unwrap(), t);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(json["calibration_n"], 500);
    }

    proptest! {
        #[test]
        fn median_half_classify_match(scores in prop::collection::vec(-1.0f64..1.0, 1..60)) {
            let t = threshold_from_scores(&scores, "m").unwrap();
            let hits = scores.iter().filter(|&&s| classify_score("p", s, &t).label == Label::Match).count();
            prop_assert!(2 * hits >= scores.len());
        }

        #[test]
        fn permutation_invariant(mut scores in prop::collection::vec(-1.0f64..1.0, 1..40), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let before = median(&scores);
            scores.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(median(&scores), before);
        }

        #[test]
        fn monotone_in_threshold(score in -1.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let at_lo = classify_score("p", score, &threshold(lo)).label;
            let at_hi = classify_score("p", score, &threshold(hi)).label;
            prop_assert!(!(at_lo == Label::NoMatch && at_hi == Label::Match));
        }
    }
}
