use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{preprocess_text, ClaimKind, ClaimPair, CorpusError, Label, RawClaim};

/// Pairs every positive input claim with a verified claim from `pool` that it
/// is not linked to, using each pool claim at most once.
///
/// The pool is shuffled with `seed`, then each input greedily takes the first
/// free allowed candidate. When an input is left without one, an augmenting
/// path search reassigns earlier inputs, so the function only fails when no
/// valid assignment exists at all.
pub fn generate_negative_pairs(
    positives: &[ClaimPair],
    pool: &[RawClaim],
    seed: u64,
) -> Result<Vec<ClaimPair>, CorpusError> {
    if let Some(bad) = pool.iter().find(|c| c.kind != ClaimKind::VerifiedClaim) {
        return Err(CorpusError::WrongKind {
            id: bad.id.clone(),
            expected: ClaimKind::VerifiedClaim,
            found: bad.kind,
        });
    }
    let pool_ids: HashSet<&str> = pool.iter().map(|c| c.id.as_str()).collect();
    if pool_ids.len() != pool.len() {
        let mut seen = HashSet::new();
        let dup = pool.iter().find(|c| !seen.insert(c.id.as_str())).unwrap();
        return Err(CorpusError::DuplicateId(dup.id.clone()));
    }
    let mut linked: HashMap<&str, HashSet<&str>> = HashMap::new();
    for pos in positives {
        if !pool_ids.contains(pos.verified_id()) {
            return Err(CorpusError::UnknownClaim(pos.verified_id().to_owned()));
        }
        linked
            .entry(pos.input_id())
            .or_default()
            .insert(pos.verified_id());
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut matcher = Matcher {
        allowed: positives
            .iter()
            .map(|pos| {
                let own = &linked[pos.input_id()];
                order
                    .iter()
                    .copied()
                    .filter(|&c| !own.contains(pool[c].id.as_str()))
                    .collect()
            })
            .collect(),
        owner: vec![None; pool.len()],
        assigned: vec![None; positives.len()],
    };

    for (i, pos) in positives.iter().enumerate() {
        let free = matcher.allowed[i]
            .iter()
            .copied()
            .find(|&c| matcher.owner[c].is_none());
        match free {
            Some(c) => matcher.take(i, c),
            None => {
                let mut visited = vec![false; pool.len()];
                if !matcher.augment(i, &mut visited) {
                    return Err(CorpusError::InsufficientPool {
                        input_id: pos.input_id().to_owned(),
                    });
                }
            }
        }
    }

    positives
        .iter()
        .zip(&matcher.assigned)
        .map(|(pos, slot)| {
            let verified = &pool[slot.expect("every input assigned")];
            let text = preprocess_text(&verified.text);
            if text.is_empty() {
                return Err(CorpusError::EmptyText {
                    id: verified.id.clone(),
                });
            }
            Ok(ClaimPair {
                pair_id: format!("neg-{}-{}", pos.input_id(), verified.id),
                input_claim: pos.input_claim.clone(),
                verified_claim: text,
                label: Label::NoMatch,
                source_ids: (pos.input_id().to_owned(), verified.id.clone()),
                split: pos.split,
            })
        })
        .collect()
}

struct Matcher {
    /// Candidate pool indices per input, in shuffled order.
    allowed: Vec<Vec<usize>>,
    owner: Vec<Option<usize>>,
    assigned: Vec<Option<usize>>,
}

impl Matcher {
    fn take(&mut self, input: usize, candidate: usize) {
        self.owner[candidate] = Some(input);
        self.assigned[input] = Some(candidate);
    }

    fn augment(&mut self, input: usize, visited: &mut [bool]) -> bool {
        for k in 0..self.allowed[input].len() {
            let c = self.allowed[input][k];
            if visited[c] {
                continue;
            }
            visited[c] = true;
            let reassigned = match self.owner[c] {
                None => true,
                Some(other) => self.augment(other, visited),
            };
            if reassigned {
                self.take(input, c);
                return true;
            }
        }
        false
    }
}
