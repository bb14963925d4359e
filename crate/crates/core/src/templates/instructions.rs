use serde::{Deserialize, Serialize};

use super::{LabelWords, TemplateError, TemplateId, TemplateRegistry};

/// Single: provider-default system text plus a user template. Ensemble: a
/// second template supplies the system text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InstructionMode {
    Single { user: TemplateId },
    Ensemble { system: TemplateId, user: TemplateId },
}

impl InstructionMode {
    /// Builds a mode from a user template and an optional system template.
    pub fn from_parts(user: TemplateId, system: Option<TemplateId>) -> Self {
        match system {
            Some(system) => InstructionMode::Ensemble { system, user },
            None => InstructionMode::Single { user },
        }
    }

    pub fn user_template(&self) -> TemplateId {
        match *self {
            InstructionMode::Single { user } | InstructionMode::Ensemble { user, .. } => user,
        }
    }

    pub fn system_template(&self) -> Option<TemplateId> {
        match *self {
            InstructionMode::Single { .. } => None,
            InstructionMode::Ensemble { system, .. } => Some(system),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InstructionMode::Single { .. } => "single",
            InstructionMode::Ensemble { .. } => "ensemble",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system_text: String,
    pub user_text: String,
    pub expected_labels: LabelWords,
}

/// Pairs the rendered user text with the system text for `mode`.
pub fn compose_instructions(
    mode: &InstructionMode,
    rendered_user: String,
    registry: &TemplateRegistry,
) -> Result<RenderedPrompt, TemplateError> {
    let user = registry.get(mode.user_template())?;
    let system_text = match mode.system_template() {
        None => registry.default_system.clone(),
        Some(id) => registry
            .get(id)
            .map_err(|_| TemplateError::MissingSystemTemplate)?
            .task
            .clone(),
    };
    Ok(RenderedPrompt {
        system_text,
        user_text: rendered_user,
        expected_labels: user.label_words.clone(),
    })
}
