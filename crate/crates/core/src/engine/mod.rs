//! The joint-attention naming game: acceptance rules, learning agents, the
//! game loop and scripted participants.

mod acceptance;
mod agent;
mod cohort;
mod game;
mod participant;
mod record;

pub use acceptance::{
    mh_acceptance, mh_ratio, mh_terms, model_acceptance, AcceptanceModelKind, ComparisonModel,
    MhTerms, ModelAcceptance,
};
pub use agent::{speaker_propose, LearningAgent, ParameterEstimate};
pub use cohort::{pair_ids, simulate_cohort};
pub use game::{
    run_naming_game, sign_agreement, turn_schedule, EngineOptions, GameConfig, GameOutcome,
    RefreshCadence, SpeakerUpdate, Turn,
};
pub use participant::{
    AgentParticipant, InitialSubmission, ListenerAction, Participant, Script, ScriptedParticipant,
    SpeakerAction,
};
pub use record::{KnowledgeSnapshot, TrialRecord};
