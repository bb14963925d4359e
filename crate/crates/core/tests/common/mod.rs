//! Deterministic synthetic fixtures shared by the integration tests.
//!
//! Checked-in files under `tests/fixtures` and `tests/golden` are produced by
//! `cargo test -p claimmatch-core --test fixtures -- --ignored`.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use claimmatch::provider::{GenerationParams, ParamsPreset, ResponseStatus, TranscriptEntry};
use claimmatch::runner::{build_requests, RunConfig, ShotMode, TranscriptMode};
use claimmatch::templates::{render_few_shot, FewShotSet, QuestionPosition, TemplateId, TemplateRegistry};
use claimmatch::{ClaimPair, Label, Split};

pub const SHORT_DATASET: &str = "short_1000.jsonl";
pub const LT_DATASET: &str = "lt_258.jsonl";
pub const SHORT_SHOTS: &str = "shots_short.jsonl";
pub const LT_SHOTS: &str = "shots_lt.jsonl";
pub const SHORT_TRANSCRIPT: &str = "transcript_short_1000.jsonl";
pub const SHOT_ORDER_SEED: u64 = 0;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const SUBJECTS: &[&str] = &[
    "the city council",
    "a regional hospital",
    "the national weather office",
    "a local school board",
    "the transport ministry",
    "a football club",
    "the central bank",
    "a university lab",
    "the fire department",
    "a supermarket chain",
    "the health agency",
    "a wind farm operator",
    "the tax authority",
    "a shipping company",
    "the state parliament",
    "a vaccine maker",
];
const VERBS: &[&str] = &[
    "announced",
    "cancelled",
    "approved",
    "postponed",
    "banned",
    "funded",
    "reported",
    "denied",
    "launched",
    "closed",
    "expanded",
    "suspended",
];
const OBJECTS: &[&str] = &[
    "a new speed camera network",
    "free bus travel for pensioners",
    "a curfew for teenagers",
    "a plan to fluoridate water",
    "a ban on plastic bags",
    "a tax on sugary drinks",
    "mandatory masks in shops",
    "a four day school week",
    "a bridge repair programme",
    "a subsidy for electric cars",
    "a pay rise for nurses",
    "the sale of public land",
];
const PLACES: &[&str] = &[
    "Lisbon", "Leeds", "Ottawa", "Nairobi", "Manila", "Lyon", "Perth", "Denver", "Porto", "Malmo", "Quito",
    "Osaka", "Cork", "Tartu", "Accra", "Bergen",
];
const MONTHS: &[&str] = &[
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];
const FILLER: &[&str] = &[
    "Officials said the decision followed months of consultation with residents",
    "Critics argued that the costs had been understated in the original proposal",
    "A spokesperson declined to give further details when contacted by reporters",
    "Posts sharing the claim were viewed tens of thousands of times within a day",
    "Opposition members called for an independent review of the figures",
    "The original statement was later edited without a public correction",
    "Local businesses reported mixed reactions among their customers",
    "Documents published online appear to contradict parts of the account",
    "Several screenshots circulating on messaging apps were found to be altered",
    "Experts noted that similar measures had been debated in previous years",
];

/// One synthetic event; `i` is unique so every rendered text is unique.
fn event(i: usize) -> (String, String) {
    let s = SUBJECTS[i % SUBJECTS.len()];
    let v = VERBS[(i / 3) % VERBS.len()];
    let o = OBJECTS[(i * 7) % OBJECTS.len()];
    let p = PLACES[(i * 5 + 1) % PLACES.len()];
    let m = MONTHS[i % MONTHS.len()];
    let year = 2015 + i % 9;
    let input = format!("BREAKING {s} in {p} has {v} {o} case {i} this {m}");
    let verified = format!("Fact check: did {s} in {p} {v} {o} in {m} {year}? Record {i}");
    (input, verified)
}

fn lengthen(text: String, i: usize, sentences: usize) -> String {
    let mut out = text;
    for k in 0..sentences {
        out.push_str(". ");
        out.push_str(FILLER[(i + k * 3) % FILLER.len()]);
    }
    out
}

/// `n_pos` positives and `n_pos` negatives. Negative k pairs input k with the
/// verified claim of event k + shift, so every verified claim is used once.
pub fn synth_pairs(prefix: &str, offset: usize, n_pos: usize, long: bool, split: Split) -> Vec<ClaimPair> {
    let texts: Vec<(String, String)> = (0..n_pos)
        .map(|k| {
            let i = offset + k;
            let (a, b) = event(i);
            if long {
                (lengthen(a, i, 6), lengthen(b, i + 1, 8))
            } else {
                (a, b)
            }
        })
        .collect();
    let shift = (n_pos / 2).max(1);
    let mut pairs = Vec::with_capacity(2 * n_pos);
    for k in 0..n_pos {
        let i = offset + k;
        pairs.push(ClaimPair {
            pair_id: format!("{prefix}-{i:04}-pos"),
            input_claim: texts[k].0.clone(),
            verified_claim: texts[k].1.clone(),
            label: Label::Match,
            source_ids: (format!("{prefix}-in-{i}"), format!("{prefix}-vc-{i}")),
            split,
        });
        let j = (k + shift) % n_pos;
        pairs.push(ClaimPair {
            pair_id: format!("{prefix}-{i:04}-neg"),
            input_claim: texts[k].0.clone(),
            verified_claim: texts[j].1.clone(),
            label: Label::NoMatch,
            source_ids: (format!("{prefix}-in-{i}"), format!("{prefix}-vc-{}", offset + j)),
            split,
        });
    }
    pairs
}

pub fn short_dataset() -> Vec<ClaimPair> {
    synth_pairs("st", 0, 500, false, Split::Test)
}

pub fn lt_dataset() -> Vec<ClaimPair> {
    synth_pairs("lt", 0, 129, true, Split::Test)
}

/// Five positives and five negatives from events disjoint with the datasets.
pub fn short_shots() -> Vec<ClaimPair> {
    synth_pairs("shot", 9000, 5, false, Split::TrainShots)
}

pub fn lt_shots() -> Vec<ClaimPair> {
    synth_pairs("ltshot", 9100, 5, true, Split::TrainShots)
}

/// Config the replay transcript fixture was recorded under.
pub fn replay_config() -> RunConfig {
    let mut cfg = RunConfig::new(
        "replay-fixture",
        TemplateId::Pd6,
        GenerationParams::preset(ParamsPreset::ApiDefault, "mock-chat"),
    );
    cfg.provider = "mock".into();
    cfg.shot_mode = ShotMode::Few;
    cfg.seed = SHOT_ORDER_SEED;
    cfg.record_or_replay = TranscriptMode::Replay;
    cfg.transcript = Some(fixtures_dir().join(SHORT_TRANSCRIPT));
    cfg
}

/// A plausible chat answer: mostly right, sometimes wrong, sometimes without
/// a usable label word.
fn mock_answer(rng: &mut ChaCha8Rng, gold: Label) -> String {
    let roll: f64 = rng.random();
    let said = if roll < 0.88 { gold } else { gold.flipped() };
    if roll > 0.96 {
        return match rng.random_range(0..3) {
            0 => "It is a partial match: the claims share a topic but not the details.".into(),
            1 => "I cannot determine this from the information given.".into(),
            _ => String::new(),
        };
    }
    let word = if said.is_match() { "Yes" } else { "No" };
    match rng.random_range(0..4) {
        0 => format!("{word}."),
        1 => word.to_uppercase(),
        2 => format!(
            "{word}, both statements {} the same event.",
            if said.is_match() {
                "describe"
            } else {
                "do not describe"
            }
        ),
        _ => format!("Answer: {}", word.to_lowercase()),
    }
}

/// Mock transcript for [`replay_config`] over the short dataset.
pub fn short_transcript(dataset: &[ClaimPair], shots: &[ClaimPair]) -> Vec<TranscriptEntry> {
    let cfg = replay_config();
    let reg = TemplateRegistry::builtin();
    let shots = FewShotSet::new(shots.to_vec(), cfg.seed).unwrap();
    let mut pairs = dataset.to_vec();
    pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let (requests, _) = build_requests(&cfg, &pairs, &shots, &reg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    requests
        .iter()
        .zip(&pairs)
        .map(|(req, pair)| TranscriptEntry {
            request_id: req.request_id.clone(),
            request_sha256: req.sha256(),
            raw_text: mock_answer(&mut rng, pair.label),
            latency_ms: rng.random_range(200..2000),
            status: ResponseStatus::Ok,
        })
        .collect()
}

/// The test item rendered in every golden file.
pub fn golden_pair() -> ClaimPair {
    ClaimPair {
        pair_id: "golden".into(),
        input_claim: "Cameras on the ring road go live next week and catch anyone above 70 mph".into(),
        verified_claim: "Did all ring road speed cameras switch on in January with a 72 mph limit".into(),
        label: Label::Match,
        source_ids: ("golden-in".into(), "golden-vc".into()),
        split: Split::Test,
    }
}

pub fn golden_name(id: TemplateId, few: bool, position: QuestionPosition) -> String {
    let mode = if few { "few" } else { "zero" };
    let pos = match position {
        QuestionPosition::Trailing => "trailing",
        QuestionPosition::Leading => "leading",
    };
    format!("{id}_{mode}_{pos}.txt")
}

pub fn render_golden(
    reg: &TemplateRegistry,
    id: TemplateId,
    shots: &FewShotSet,
    position: QuestionPosition,
) -> String {
    let mut text = render_few_shot(reg.get(id).unwrap(), shots, &golden_pair(), position).unwrap();
    text.push('\n');
    text
}
