//! Mapping raw model answers onto `Match`/`NoMatch`.
//!
//! The first standalone label word wins (case-insensitive, whole word). An
//! answer with no label word, or one that says "partial match" before any
//! label word, falls back to the negative class.

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::templates::LabelWords;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Clean,
    FallbackNegative,
}

/// A classified pair. `matched_token` is the label word as it appeared in the
/// answer (clean parses only).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub pair_id: String,
    pub label: Label,
    pub parse_status: ParseStatus,
    pub matched_token: Option<String>,
    pub raw_text: String,
    /// Set when a post-processing rule flipped the label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relabel_rule: Option<String>,
}

const HEDGE: (&str, &str) = ("partial", "match");

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte spans of maximal word-character runs.
fn word_spans(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut iter = text.char_indices().peekable();
    std::iter::from_fn(move || {
        let (start, _) = iter.by_ref().find(|&(_, c)| is_word_char(c))?;
        let mut end = text.len();
        while let Some(&(i, c)) = iter.peek() {
            if !is_word_char(c) {
                end = i;
                break;
            }
            iter.next();
        }
        Some((start, end))
    })
}

pub fn parse_response(pair_id: &str, raw: &str, words: &LabelWords) -> Prediction {
    let spans: Vec<(usize, usize)> = word_spans(raw).collect();
    let mut prev: Option<(usize, usize)> = None;
    let mut verdict = None;
    for &(start, end) in &spans {
        let token = &raw[start..end];
        if let Some((ps, pe)) = prev {
            if raw[ps..pe].eq_ignore_ascii_case(HEDGE.0)
                && &raw[pe..start] == " "
                && token.eq_ignore_ascii_case(HEDGE.1)
            {
                break;
            }
        }
        if token.eq_ignore_ascii_case(&words.positive) {
            verdict = Some((Label::Match, token));
            break;
        }
        if token.eq_ignore_ascii_case(&words.negative) {
            verdict = Some((Label::NoMatch, token));
            break;
        }
        prev = Some((start, end));
    }
    match verdict {
        Some((label, token)) => Prediction {
            pair_id: pair_id.to_owned(),
            label,
            parse_status: ParseStatus::Clean,
            matched_token: Some(token.to_owned()),
            raw_text: raw.to_owned(),
            relabel_rule: None,
        },
        None => Prediction {
            pair_id: pair_id.to_owned(),
            label: Label::NoMatch,
            parse_status: ParseStatus::FallbackNegative,
            matched_token: None,
            raw_text: raw.to_owned(),
            relabel_rule: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelRule {
    pub id: String,
    pub pattern: String,
}

/// Phrase patterns marking answers that call the two claims the same topic or
/// event differing only in minor details. Matched case-insensitively.
#[derive(Debug, Clone)]
pub struct RelabelRules {
    rules: Vec<(String, Regex)>,
}

#[derive(Debug, Deserialize)]
struct RelabelFile {
    rules: Vec<RelabelRule>,
}

impl RelabelRules {
    pub fn new(rules: &[RelabelRule]) -> Result<Self, regex::Error> {
        let rules = rules
            .iter()
            .map(|r| {
                let re = RegexBuilder::new(&r.pattern)
                    .case_insensitive(true)
                    .dot_matches_new_line(true)
                    .build()?;
                Ok((r.id.clone(), re))
            })
            .collect::<Result<_, regex::Error>>()?;
        Ok(Self { rules })
    }

    /// Reads `[[rules]]` tables with `id` and `pattern` keys.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let file: RelabelFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::new(&file.rules).map_err(|e| e.to_string())
    }

    pub fn builtin() -> Self {
        let rules = [
            (
                "similar-not-same",
                r"similar,?\s+but\s+not\s+(?:the\s+)?(?:exactly\s+)?(?:same|identical)\s+(?:events?|topics?|incidents?|claims?)",
            ),
            (
                "same-event-minor-details",
                r"(?:same|identical)\s+(?:topic|event|incident)s?\b.{0,80}?\b(?:minor|non-substantial|not\s+substantial|insignificant|small)\s+(?:details|differences)",
            ),
            (
                "differ-in-minor-details",
                r"differ(?:s|ing)?\s+(?:only\s+)?in\s+(?:some\s+)?(?:minor|non-substantial|not\s+substantial|insignificant|small)\s+details",
            ),
        ]
        .map(|(id, pattern)| RelabelRule {
            id: id.into(),
            pattern: pattern.into(),
        });
        Self::new(&rules).expect("builtin relabel patterns compile")
    }

    fn first_hit(&self, text: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|(_, re)| re.is_match(text))
            .map(|(id, _)| id.as_str())
    }
}

impl Default for RelabelRules {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Flips a `NoMatch` prediction whose explanation says the claims concern the
/// same event up to minor details. `Match` predictions, answers without
/// explanation text and `parse_status` are left alone.
pub fn relabel_same_event(pred: Prediction, rules: &RelabelRules) -> Prediction {
    if pred.label != Label::NoMatch || word_spans(&pred.raw_text).nth(1).is_none() {
        return pred;
    }
    match rules.first_hit(&pred.raw_text) {
        Some(id) => Prediction {
            label: Label::Match,
            relabel_rule: Some(id.to_owned()),
            ..pred
        },
        None => pred,
    }
}
