//! Prompt-template registry and rendering.
//!
//! Templates come from a versioned TOML manifest (the built-in one is
//! compiled in). Each template has a trailing-question pattern, a hand-written
//! leading-question variant, label words, and a task sentence used as the
//! system instruction in ensemble mode.

mod fewshot;
mod instructions;
mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

pub use fewshot::{render_few_shot, FewShotSet};
pub use instructions::{compose_instructions, InstructionMode, RenderedPrompt};
pub use render::{extract_claims, render_single, INPUT_PREFIX, VERIFIED_PREFIX};

pub const BUILTIN_MANIFEST: &str = include_str!("../../templates/manifest.toml");

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("ensemble mode needs a system template")]
    MissingSystemTemplate,
    #[error("few-shot example {0} belongs to the test split")]
    ShotLeak(String),
    #[error("few-shot set must be balanced, got {positive} positive and {negative} negative")]
    UnbalancedShots { positive: usize, negative: usize },
    #[error("invalid template manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateId {
    Cm1,
    Cm2,
    Pd1,
    Pd2,
    Pd3,
    Pd4,
    Pd5,
    Pd6,
    Nli1,
    Nli2,
    Nli3,
    Nli4,
    Nli5,
}

impl TemplateId {
    pub const ALL: [TemplateId; 13] = [
        TemplateId::Cm1,
        TemplateId::Cm2,
        TemplateId::Pd1,
        TemplateId::Pd2,
        TemplateId::Pd3,
        TemplateId::Pd4,
        TemplateId::Pd5,
        TemplateId::Pd6,
        TemplateId::Nli1,
        TemplateId::Nli2,
        TemplateId::Nli3,
        TemplateId::Nli4,
        TemplateId::Nli5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Cm1 => "CM-1",
            TemplateId::Cm2 => "CM-2",
            TemplateId::Pd1 => "PD-1",
            TemplateId::Pd2 => "PD-2",
            TemplateId::Pd3 => "PD-3",
            TemplateId::Pd4 => "PD-4",
            TemplateId::Pd5 => "PD-5",
            TemplateId::Pd6 => "PD-6",
            TemplateId::Nli1 => "NLI-1",
            TemplateId::Nli2 => "NLI-2",
            TemplateId::Nli3 => "NLI-3",
            TemplateId::Nli4 => "NLI-4",
            TemplateId::Nli5 => "NLI-5",
        }
    }

    pub fn family(self) -> Family {
        match self {
            TemplateId::Cm1 | TemplateId::Cm2 => Family::Cm,
            TemplateId::Nli1 | TemplateId::Nli2 | TemplateId::Nli3 | TemplateId::Nli4 | TemplateId::Nli5 => {
                Family::Nli
            }
            _ => Family::Pd,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TemplateError::UnknownTemplate(s.to_owned()))
    }
}

impl Serialize for TemplateId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TemplateId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "CM")]
    Cm,
    #[serde(rename = "PD")]
    Pd,
    #[serde(rename = "NLI")]
    Nli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionPosition {
    #[default]
    Trailing,
    Leading,
}

/// The (positive, negative) answer words of a template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelWords {
    pub positive: String,
    pub negative: String,
}

impl LabelWords {
    pub fn yes_no() -> Self {
        Self {
            positive: "yes".into(),
            negative: "no".into(),
        }
    }

    pub fn true_false() -> Self {
        Self {
            positive: "true".into(),
            negative: "false".into(),
        }
    }

    pub fn word_for(&self, label: crate::corpus::Label) -> &str {
        if label.is_match() {
            &self.positive
        } else {
            &self.negative
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub family: Family,
    pub pattern: String,
    pub leading_pattern: String,
    pub label_words: LabelWords,
    pub task: String,
}

impl PromptTemplate {
    pub fn pattern_for(&self, position: QuestionPosition) -> &str {
        match position {
            QuestionPosition::Trailing => &self.pattern,
            QuestionPosition::Leading => &self.leading_pattern,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ManifestFile {
    version: u32,
    default_system: String,
    template: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    id: TemplateId,
    family: Family,
    labels: [String; 2],
    pattern: String,
    leading: String,
    task: String,
}

/// Immutable set of templates loaded from a manifest.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    pub version: u32,
    pub default_system: String,
    templates: Vec<PromptTemplate>,
    manifest_sha256: String,
}

fn check_slots(id: TemplateId, pattern: &str) -> Result<(), TemplateError> {
    let a = pattern.matches("{A}").count();
    let b = pattern.matches("{B}").count();
    if a != 1 || b != 1 {
        return Err(TemplateError::Manifest(format!(
            "{id}: pattern {pattern:?} must contain {{A}} and {{B}} exactly once"
        )));
    }
    if pattern.find("{A}") > pattern.find("{B}") {
        return Err(TemplateError::Manifest(format!("{id}: {{A}} must precede {{B}}")));
    }
    Ok(())
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_MANIFEST).expect("built-in template manifest is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let file: ManifestFile = toml::from_str(text).map_err(|e| TemplateError::Manifest(e.to_string()))?;
        let mut templates: Vec<PromptTemplate> = Vec::with_capacity(file.template.len());
        for entry in file.template {
            if templates.iter().any(|t| t.id == entry.id) {
                return Err(TemplateError::Manifest(format!("duplicate id {}", entry.id)));
            }
            if entry.family != entry.id.family() {
                return Err(TemplateError::Manifest(format!(
                    "{}: family {:?} does not match id",
                    entry.id, entry.family
                )));
            }
            check_slots(entry.id, &entry.pattern)?;
            check_slots(entry.id, &entry.leading)?;
            let [positive, negative] = entry.labels;
            let label_words = LabelWords { positive, negative };
            if label_words != LabelWords::yes_no() && label_words != LabelWords::true_false() {
                return Err(TemplateError::Manifest(format!(
                    "{}: label words must be yes/no or true/false",
                    entry.id
                )));
            }
            templates.push(PromptTemplate {
                id: entry.id,
                family: entry.family,
                pattern: entry.pattern,
                leading_pattern: entry.leading,
                label_words,
                task: entry.task,
            });
        }
        templates.sort_by_key(|t| t.id);
        Ok(Self {
            version: file.version,
            default_system: file.default_system,
            templates,
            manifest_sha256: sha256_hex(text),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Manifest(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn get(&self, id: TemplateId) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// SHA-256 of the manifest text the registry was loaded from.
    pub fn manifest_sha256(&self) -> &str {
        &self.manifest_sha256
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_cardinality() {
        let reg = TemplateRegistry::builtin();
        assert_eq!(reg.len(), 13);
        let count = |f| reg.templates().iter().filter(|t| t.family == f).count();
        assert_eq!(
            (count(Family::Cm), count(Family::Pd), count(Family::Nli)),
            (2, 6, 5)
        );
    }

    #[test]
    fn family_label_rule() {
        for t in TemplateRegistry::builtin().templates() {
            let expected = match t.id {
                TemplateId::Nli1 | TemplateId::Nli2 => LabelWords::true_false(),
                _ => LabelWords::yes_no(),
            };
            assert_eq!(t.label_words, expected, "{}", t.id);
        }
    }

    #[test]
    fn id_round_trip() {
        for id in TemplateId::ALL {
            assert_eq!(id.as_str().parse::<TemplateId>().unwrap(), id);
        }
        assert!(matches!(
            "PD-7".parse::<TemplateId>(),
            Err(TemplateError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn manifest_validation() {
        let bad_slots = r#"
version = 1
default_system = "s"
[[template]]
id = "CM-1"
family = "CM"
labels = ["yes", "no"]
pattern = "{A} {A} {B}"
leading = "{A} {B}"
task = "t"
"#;
        assert!(matches!(
            TemplateRegistry::from_toml(bad_slots),
            Err(TemplateError::Manifest(_))
        ));
        let bad_labels = bad_slots
            .replace("{A} {A} {B}", "{A} {B}")
            .replace("[\"yes\", \"no\"]", "[\"ok\", \"no\"]");
        assert!(TemplateRegistry::from_toml(&bad_labels).is_err());
        let ok = bad_slots.replace("{A} {A} {B}", "{A} {B}");
        let reg = TemplateRegistry::from_toml(&ok).unwrap();
        assert!(matches!(
            reg.get(TemplateId::Pd6),
            Err(TemplateError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn manifest_hash_tracks_text() {
        let a = TemplateRegistry::builtin();
        let b = TemplateRegistry::from_toml(&format!("{BUILTIN_MANIFEST}\n# edited\n")).unwrap();
        assert_ne!(a.manifest_sha256(), b.manifest_sha256());
    }
}
