//! Interpretation prompts built from top-ranked turns.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TopicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptTemplate {
    /// Therapist turns grouped by each of the ten learned topics.
    TenTopics,
    /// Patient turns grouped by the three principal topics.
    PrincipalPatient,
    /// Therapist turns grouped by the three principal topics.
    PrincipalTherapist,
}

impl PromptTemplate {
    pub const ALL: [PromptTemplate; 3] = [
        PromptTemplate::TenTopics,
        PromptTemplate::PrincipalPatient,
        PromptTemplate::PrincipalTherapist,
    ];

    pub fn wording(self) -> &'static str {
        match self {
            PromptTemplate::TenTopics => {
                "I have the following top sentences exemplifying ten topics. Can you summarize what the three interventions items attributed to each topic spaces the therapists are talking about, respectively? For instance, what therapeutic intervention the therapist is applying."
            }
            PromptTemplate::PrincipalPatient => {
                "I have the following top sentences exemplifying three principal topic spaces. Can you summarize what the three topics the patients are talking about, respectively?"
            }
            PromptTemplate::PrincipalTherapist => {
                "Again, I have the following top sentences exemplifying the three principal topic spaces. Can you summarize what the three intervention items attributed to each principal topic spaces the therapists are talking about, respectively? For instance, what therapeutic intervention is the therapist applying."
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptTemplate::TenTopics => "ten-topics",
            PromptTemplate::PrincipalPatient => "principal-patient",
            PromptTemplate::PrincipalTherapist => "principal-therapist",
        }
    }

    /// Default block label for group `i` (0-based).
    pub fn block_label(self, i: usize) -> String {
        match self {
            PromptTemplate::TenTopics => format!("Topic {}", i + 1),
            _ => format!("Principal topic {}", i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSelection {
    pub label: String,
    pub sentences: Vec<String>,
}

/// Render one prompt document: the template wording, then one numbered block
/// of sentences per selection.
pub fn export_prompts(template: PromptTemplate, selections: &[TopicSelection]) -> Result<String, TopicError> {
    if selections.is_empty() {
        return Err(TopicError::EmptySelection("no topic blocks".into()));
    }
    if let Some(s) = selections.iter().find(|s| s.sentences.is_empty()) {
        return Err(TopicError::EmptySelection(format!(
            "block {:?} has no sentences",
            s.label
        )));
    }
    let mut doc = String::new();
    doc.push_str(template.wording());
    doc.push('\n');
    for sel in selections {
        let _ = write!(doc, "\n{}:\n", sel.label);
        for (i, s) in sel.sentences.iter().enumerate() {
            let one_line = s.split_whitespace().collect::<Vec<_>>().join(" ");
            let _ = writeln!(doc, "{}. {}", i + 1, one_line);
        }
    }
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body for a chat-completion style interpretation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

impl InterpretationRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.into(),
            }],
        }
    }
}
