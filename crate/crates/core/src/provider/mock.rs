//! Offline providers for tests and dry runs.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    ChatProvider, Embedder, EmbeddingVector, PromptRequest, ProviderError, ProviderResponse, ResponseStatus,
};
use crate::corpus::{ClaimPair, Label};
use crate::digest::sha256_hex;
use crate::templates::LabelWords;

/// Answers every request with the gold label word of the pair whose id is the
/// request id, so a correct pipeline scores perfectly.
#[derive(Debug, Clone)]
pub struct EchoGoldProvider {
    gold: HashMap<String, Label>,
    words: LabelWords,
}

impl EchoGoldProvider {
    pub fn new(pairs: &[ClaimPair], words: LabelWords) -> Self {
        Self {
            gold: pairs.iter().map(|p| (p.pair_id.clone(), p.label)).collect(),
            words,
        }
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl ChatProvider for EchoGoldProvider {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        let label = self
            .gold
            .get(&req.request_id)
            .ok_or_else(|| ProviderError::MissingRecord(req.request_id.clone()))?;
        Ok(ProviderResponse::ok(
            format!("{}.", capitalize(self.words.word_for(*label))),
            0,
        ))
    }
}

/// One scripted attempt outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedStep {
    Reply(String),
    RateLimited,
    Timeout,
    Error(String),
}

/// Fault-injection double: plays back a fixed sequence of outcomes, one per
/// call, regardless of the request.
#[derive(Debug)]
pub struct ScriptedProvider {
    steps: Mutex<VecDeque<ScriptedStep>>,
    calls: AtomicU32,
}

impl ScriptedProvider {
    pub fn new(steps: impl IntoIterator<Item = ScriptedStep>) -> Self {
        Self {
            steps: Mutex::new(steps.into_iter().collect()),
            calls: AtomicU32::new(0),
        }
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, _req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let step = self.steps.lock().expect("script lock").pop_front();
        match step {
            Some(ScriptedStep::Reply(text)) => Ok(ProviderResponse::ok(text, 1)),
            Some(ScriptedStep::RateLimited) => Err(ProviderError::Transient {
                status: ResponseStatus::RateLimited,
                message: "scripted 429".into(),
            }),
            Some(ScriptedStep::Timeout) => Err(ProviderError::Transient {
                status: ResponseStatus::Timeout,
                message: "scripted timeout".into(),
            }),
            Some(ScriptedStep::Error(msg)) => Err(ProviderError::Failed(msg)),
            None => Err(ProviderError::Failed("script exhausted".into())),
        }
    }
}

/// Pseudo-random vectors seeded by a hash of (model name, text): stable across
/// runs, unrelated for different texts.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    model_name: String,
    dim: usize,
}

impl HashEmbedder {
    pub fn new(model_name: impl Into<String>, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            model_name: model_name.into(),
            dim,
        }
    }
}

impl Embedder for HashEmbedder {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let mut hasher = Sha256::new();
        hasher.update(self.model_name.as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let values = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        EmbeddingVector::new(values, &self.model_name)
    }
}

/// Which side of a pair a tagged text sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Input,
    Verified,
}

/// Analytic embeddings for registered texts: `3·e_topic + e_side`.
///
/// An input and a verified text on the same topic have cosine exactly 9/10;
/// texts on different topics have cosine 0 (opposite sides) or 1/10 (same
/// side).
#[derive(Debug, Clone)]
pub struct TopicEmbedder {
    model_name: String,
    n_topics: usize,
    tags: HashMap<String, (usize, Side)>,
}

const TOPIC_WEIGHT: f64 = 3.0;
const SIDE_WEIGHT: f64 = 1.0;

impl TopicEmbedder {
    pub fn new(model_name: impl Into<String>, n_topics: usize) -> Self {
        Self {
            model_name: model_name.into(),
            n_topics,
            tags: HashMap::new(),
        }
    }

    pub fn tag(&mut self, text: impl Into<String>, topic: usize, side: Side) {
        assert!(topic < self.n_topics, "topic {topic} out of range");
        self.tags.insert(text.into(), (topic, side));
    }

    /// Tags both claims of every pair. Each positive pair defines a topic
    /// shared by its two claims; claims seen only in negatives get topics of
    /// their own.
    pub fn for_pairs(model_name: impl Into<String>, pairs: &[ClaimPair]) -> Self {
        let mut input_topic: HashMap<&str, usize> = HashMap::new();
        let mut verified_topic: HashMap<&str, usize> = HashMap::new();
        let mut n = 0;
        for p in pairs.iter().filter(|p| p.label == Label::Match) {
            let t = match input_topic
                .get(p.input_id())
                .or(verified_topic.get(p.verified_id()))
            {
                Some(&t) => t,
                None => {
                    n += 1;
                    n - 1
                }
            };
            input_topic.entry(p.input_id()).or_insert(t);
            verified_topic.entry(p.verified_id()).or_insert(t);
        }
        let mut tags = Vec::with_capacity(2 * pairs.len());
        for p in pairs {
            for (map, id, text, side) in [
                (&mut input_topic, p.input_id(), &p.input_claim, Side::Input),
                (
                    &mut verified_topic,
                    p.verified_id(),
                    &p.verified_claim,
                    Side::Verified,
                ),
            ] {
                let t = *map.entry(id).or_insert_with(|| {
                    n += 1;
                    n - 1
                });
                tags.push((text.clone(), t, side));
            }
        }
        let mut embedder = Self::new(model_name, n.max(1));
        for (text, topic, side) in tags {
            embedder.tag(text, topic, side);
        }
        embedder
    }
}

impl Embedder for TopicEmbedder {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let &(topic, side) = self
            .tags
            .get(text)
            .ok_or_else(|| ProviderError::Failed(format!("untagged text {text:?}")))?;
        let mut values = vec![0.0; self.n_topics + 2];
        values[topic] = TOPIC_WEIGHT;
        values[self.n_topics + side as usize] = SIDE_WEIGHT;
        EmbeddingVector::new(values, &self.model_name)
    }
}

/// Memoizes another embedder, keyed by (model name, text hash).
#[derive(Debug)]
pub struct CachedEmbedder<E> {
    inner: E,
    cache: Mutex<HashMap<(String, String), EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let key = (self.inner.model_name().to_owned(), sha256_hex(text));
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::cosine_similarity;
    use crate::corpus::Split;

    #[test]
    fn hash_embedder_is_deterministic() {
        let e = HashEmbedder::new("mock", 64);
        assert_eq!(e.embed("x").unwrap(), e.embed("x").unwrap());
        assert_eq!(e.embed("x").unwrap().dim(), 64);
        let c =
            cosine_similarity(&e.embed("x").unwrap(), &e.embed("an unrelated sentence").unwrap()).unwrap();
        assert!(c < 1.0);
        assert!(matches!(e.embed(""), Err(ProviderError::EmptyText)));
        let other_model = HashEmbedder::new("mock-2", 64);
        assert_ne!(
            e.embed("x").unwrap().values(),
            other_model.embed("x").unwrap().values()
        );
    }

    #[test]
    fn topic_margins() {
        let mut e = TopicEmbedder::new("topics", 3);
        e.tag("a-in", 0, Side::Input);
        e.tag("a-ver", 0, Side::Verified);
        e.tag("b-in", 1, Side::Input);
        e.tag("b-ver", 1, Side::Verified);
        let cos = |x: &str, y: &str| cosine_similarity(&e.embed(x).unwrap(), &e.embed(y).unwrap()).unwrap();
        assert_eq!(cos("a-in", "a-ver"), 0.9);
        assert!(cos("a-in", "b-ver") <= 0.3);
        assert!(cos("a-in", "b-in") <= 0.3);
        assert!(e.embed("unknown").is_err());
    }

    #[test]
    fn topics_from_pairs() {
        let pair = |id: &str, i: &str, v: &str, label| ClaimPair {
            pair_id: id.into(),
            input_claim: format!("text {i}"),
            verified_claim: format!("text {v}"),
            label,
            source_ids: (i.into(), v.into()),
            split: Split::Test,
        };
        let pairs = [
            pair("p1", "i1", "v1", Label::Match),
            pair("p2", "i2", "v2", Label::Match),
            pair("n1", "i1", "v2", Label::NoMatch),
            pair("n2", "i2", "v3", Label::NoMatch),
        ];
        let e = TopicEmbedder::for_pairs("t", &pairs);
        for p in &pairs {
            let c = cosine_similarity(
                &e.embed(&p.input_claim).unwrap(),
                &e.embed(&p.verified_claim).unwrap(),
            )
            .unwrap();
            if p.label == Label::Match {
                assert!(c >= 0.9, "{}: {c}", p.pair_id);
            } else {
                assert!(c <= 0.3, "{}: {c}", p.pair_id);
            }
        }
    }

    #[test]
    fn cache_hits() {
        let e = CachedEmbedder::new(HashEmbedder::new("m", 8));
        let a = e.embed("x").unwrap();
        let b = e.embed("x").unwrap();
        e.embed("y").unwrap();
        assert_eq!(a, b);
        assert_eq!(e.cached(), 2);
    }

    #[test]
    fn echo_gold_answers_gold_word() {
        let pairs = [ClaimPair {
            pair_id: "p".into(),
            input_claim: "a".into(),
            verified_claim: "b".into(),
            label: Label::NoMatch,
            source_ids: ("i".into(), "v".into()),
            split: Split::Test,
        }];
        let p = EchoGoldProvider::new(&pairs, LabelWords::true_false());
        let req = PromptRequest {
            request_id: "p".into(),
            system_text: String::new(),
            user_text: "u".into(),
            params: crate::provider::GenerationParams::preset(Default::default(), "m"),
        };
        assert_eq!(p.complete(&req).unwrap().raw_text, "False.");
        let mut unknown = req.clone();
        unknown.request_id = "q".into();
        assert!(p.complete(&unknown).is_err());
    }
}
