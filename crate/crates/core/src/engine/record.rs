use serde::{Deserialize, Serialize};

/// A participant's categorization and sign memory over one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeSnapshot {
    pub categories: Vec<usize>,
    pub signs: Vec<usize>,
}

/// One naming exchange. Signs and categories are 0-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub round: usize,
    pub dataset_id: String,
    pub stimulus_index: usize,
    pub speaker_id: String,
    pub listener_id: String,
    /// The speaker's proposal `s*`.
    pub speaker_sign: usize,
    /// The listener's own sign before the decision.
    pub listener_sign: usize,
    pub listener_category: Option<usize>,
    /// Known when an agent decided; `None` for human sessions.
    pub r_mh: Option<f64>,
    pub accepted: bool,
    /// Category the listener switched the stimulus to after deciding.
    pub post_edit: Option<usize>,
    /// Listener's full state when deciding.
    pub listener_snapshot: Option<KnowledgeSnapshot>,
}

impl TrialRecord {
    /// `z` as 0/1.
    pub fn z(&self) -> u8 {
        u8::from(self.accepted)
    }

    /// The categorization analysis should treat as observed for this trial.
    pub fn effective_category(&self) -> Option<usize> {
        self.post_edit.or(self.listener_category)
    }
}
