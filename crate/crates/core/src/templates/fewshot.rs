use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{render_single, PromptTemplate, QuestionPosition, TemplateError};
use crate::corpus::{ClaimPair, Label, Split};

/// Labelled examples prepended to a prompt. Holds equally many positive and
/// negative pairs in a seeded order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotSet {
    examples: Vec<ClaimPair>,
    order_seed: u64,
}

impl FewShotSet {
    /// Zero-shot: no examples.
    pub fn empty() -> Self {
        Self {
            examples: Vec::new(),
            order_seed: 0,
        }
    }

    /// Sorts `pairs` by id, then applies a seeded Fisher-Yates shuffle, so the
    /// order depends only on the set of pairs and the seed.
    pub fn new(mut pairs: Vec<ClaimPair>, order_seed: u64) -> Result<Self, TemplateError> {
        if let Some(leak) = pairs.iter().find(|p| p.split == Split::Test) {
            return Err(TemplateError::ShotLeak(leak.pair_id.clone()));
        }
        let positive = pairs.iter().filter(|p| p.label == Label::Match).count();
        let negative = pairs.len() - positive;
        if positive != negative {
            return Err(TemplateError::UnbalancedShots { positive, negative });
        }
        pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
        pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
        Ok(Self {
            examples: pairs,
            order_seed,
        })
    }

    pub fn examples(&self) -> &[ClaimPair] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.examples.iter().filter(|p| p.label == Label::Match).count()
    }

    pub fn n_negative(&self) -> usize {
        self.len() - self.n_positive()
    }

    pub fn order_seed(&self) -> u64 {
        self.order_seed
    }
}

const SHOT_SEPARATOR: &str = "\n\n";

/// Each shot rendered and answered with its gold label word, then the test
/// item with an empty answer, separated by blank lines.
pub fn render_few_shot(
    template: &PromptTemplate,
    shots: &FewShotSet,
    pair: &ClaimPair,
    position: QuestionPosition,
) -> Result<String, TemplateError> {
    let mut out = String::new();
    for shot in shots.examples() {
        if shot.split == Split::Test || shot.pair_id == pair.pair_id {
            return Err(TemplateError::ShotLeak(shot.pair_id.clone()));
        }
        out.push_str(&render_single(template, shot, position));
        out.push(' ');
        out.push_str(template.label_words.word_for(shot.label));
        out.push_str(SHOT_SEPARATOR);
    }
    out.push_str(&render_single(template, pair, position));
    Ok(out)
}
