//! Synthetic participants that answer the session protocol's prompts.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::acceptance::{model_acceptance, AcceptanceModelKind};
use super::agent::{LearningAgent, ParameterEstimate};
use super::game::SpeakerUpdate;
use crate::error::{Error, Result};
use crate::model::{GibbsOptions, Hyperparams};
use crate::rng::{derive_seed, substream, SimRng};
use crate::stimulus::StimulusSet;

/// Initial categorization of a dataset. Signs default to the categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSubmission {
    pub categories: Vec<usize>,
    pub signs: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpeakerAction {
    /// New category for the shown stimulus, sent before naming.
    pub edit: Option<usize>,
    pub name: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ListenerAction {
    /// New category for the shown stimulus, sent before deciding.
    pub edit: Option<usize>,
    pub accept: bool,
}

/// Anything that can play one side of a session.
pub trait Participant {
    fn categorize(&mut self, dataset: &StimulusSet) -> Result<InitialSubmission>;
    fn speak(&mut self, stimulus: usize) -> Result<SpeakerAction>;
    fn listen(&mut self, stimulus: usize, proposal: usize) -> Result<ListenerAction>;
    /// Called on both sides after a decision. A listener may answer with a
    /// post-decision re-categorization of the stimulus.
    fn outcome(
        &mut self,
        stimulus: usize,
        proposal: usize,
        accepted: bool,
        was_listener: bool,
    ) -> Result<Option<usize>>;
}

/// A fixed list of answers, consumed in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub categorizations: VecDeque<InitialSubmission>,
    pub names: VecDeque<usize>,
    pub decisions: VecDeque<bool>,
    /// Post-decision edits keyed by decision ordinal (0-based).
    pub post_edits: BTreeMap<usize, usize>,
    #[serde(skip)]
    decisions_made: usize,
}

impl Script {
    pub fn new(
        categorizations: Vec<InitialSubmission>,
        names: Vec<usize>,
        decisions: Vec<bool>,
    ) -> Self {
        Self {
            categorizations: categorizations.into(),
            names: names.into(),
            decisions: decisions.into(),
            ..Self::default()
        }
    }

    fn exhausted(what: &str) -> Error {
        Error::Protocol(format!("script exhausted: no {what} left"))
    }
}

impl Participant for Script {
    fn categorize(&mut self, _dataset: &StimulusSet) -> Result<InitialSubmission> {
        self.categorizations
            .pop_front()
            .ok_or_else(|| Self::exhausted("categorization"))
    }

    fn speak(&mut self, _stimulus: usize) -> Result<SpeakerAction> {
        let name = self
            .names
            .pop_front()
            .ok_or_else(|| Self::exhausted("name"))?;
        Ok(SpeakerAction { edit: None, name })
    }

    fn listen(&mut self, _stimulus: usize, _proposal: usize) -> Result<ListenerAction> {
        let accept = self
            .decisions
            .pop_front()
            .ok_or_else(|| Self::exhausted("decision"))?;
        Ok(ListenerAction { edit: None, accept })
    }

    fn outcome(
        &mut self,
        _stimulus: usize,
        _proposal: usize,
        _accepted: bool,
        was_listener: bool,
    ) -> Result<Option<usize>> {
        if !was_listener {
            return Ok(None);
        }
        let ordinal = self.decisions_made;
        self.decisions_made += 1;
        Ok(self.post_edits.get(&ordinal).copied())
    }
}

/// A learning agent that decides with an acceptance model.
#[derive(Debug, Clone)]
pub struct AgentParticipant {
    pub model: AcceptanceModelKind,
    pub hyper: Hyperparams,
    pub estimate: ParameterEstimate,
    pub gibbs: GibbsOptions,
    pub speaker_update: SpeakerUpdate,
    agent: Option<LearningAgent>,
    seed: u64,
    datasets_seen: u64,
    rng: SimRng,
}

impl AgentParticipant {
    pub fn new(model: AcceptanceModelKind, hyper: Hyperparams, seed: u64) -> Result<Self> {
        model.validate()?;
        hyper.validate()?;
        Ok(Self {
            model,
            hyper,
            estimate: ParameterEstimate::default(),
            gibbs: GibbsOptions {
                iterations: 300,
                burn_in: 100,
            },
            speaker_update: SpeakerUpdate::default(),
            agent: None,
            seed,
            datasets_seen: 0,
            rng: substream(seed, 0),
        })
    }

    pub fn agent(&self) -> Option<&LearningAgent> {
        self.agent.as_ref()
    }

    fn agent_mut(&mut self) -> Result<&mut LearningAgent> {
        self.agent.as_mut().ok_or_else(|| {
            Error::Protocol("agent participant has not categorized a dataset yet".into())
        })
    }
}

impl Participant for AgentParticipant {
    fn categorize(&mut self, dataset: &StimulusSet) -> Result<InitialSubmission> {
        let seed = derive_seed(self.seed, self.datasets_seen + 1);
        self.datasets_seen += 1;
        let agent = LearningAgent::initialize(
            dataset.points(),
            self.hyper.clone(),
            self.estimate,
            self.gibbs,
            seed,
        )?;
        let submission = InitialSubmission {
            categories: agent.state.assignments.clone(),
            signs: Some(agent.state.signs.clone()),
        };
        self.agent = Some(agent);
        Ok(submission)
    }

    fn speak(&mut self, stimulus: usize) -> Result<SpeakerAction> {
        let mut rng = self.rng.clone();
        let agent = self.agent_mut()?;
        let before = agent.state.assignments[stimulus];
        let after = agent.perceive(stimulus, &mut rng)?;
        let name = agent.propose(stimulus, &mut rng)?;
        self.rng = rng;
        Ok(SpeakerAction {
            edit: (after != before).then_some(after),
            name,
        })
    }

    fn listen(&mut self, stimulus: usize, proposal: usize) -> Result<ListenerAction> {
        let mut rng = self.rng.clone();
        let model = self.model;
        let agent = self.agent_mut()?;
        let before = agent.state.assignments[stimulus];
        let after = agent.perceive(stimulus, &mut rng)?;
        agent.refresh(&mut rng)?;
        let terms = agent.judge(stimulus, proposal)?;
        let p =
            model_acceptance(&model, terms.r_mh, terms.numerator, terms.denominator).probability;
        let accept = rng.random::<f64>() < p;
        self.rng = rng;
        Ok(ListenerAction {
            edit: (after != before).then_some(after),
            accept,
        })
    }

    fn outcome(
        &mut self,
        stimulus: usize,
        proposal: usize,
        accepted: bool,
        was_listener: bool,
    ) -> Result<Option<usize>> {
        let mut rng = self.rng.clone();
        let adopt = was_listener || self.speaker_update == SpeakerUpdate::AdoptOnAcceptance;
        let agent = self.agent_mut()?;
        if accepted && adopt {
            agent.state.signs[stimulus] = proposal;
        }
        agent.refresh(&mut rng)?;
        self.rng = rng;
        Ok(None)
    }
}

/// A participant driven either by a fixed script or by a decision rule.
#[derive(Debug, Clone)]
pub enum ScriptedParticipant {
    Replay(Script),
    Rule(Box<AgentParticipant>),
}

impl ScriptedParticipant {
    pub fn replay(script: Script) -> Self {
        ScriptedParticipant::Replay(script)
    }

    pub fn rule(model: AcceptanceModelKind, hyper: Hyperparams, seed: u64) -> Result<Self> {
        Ok(ScriptedParticipant::Rule(Box::new(AgentParticipant::new(
            model, hyper, seed,
        )?)))
    }
}

impl Participant for ScriptedParticipant {
    fn categorize(&mut self, dataset: &StimulusSet) -> Result<InitialSubmission> {
        match self {
            ScriptedParticipant::Replay(s) => s.categorize(dataset),
            ScriptedParticipant::Rule(a) => a.categorize(dataset),
        }
    }

    fn speak(&mut self, stimulus: usize) -> Result<SpeakerAction> {
        match self {
            ScriptedParticipant::Replay(s) => s.speak(stimulus),
            ScriptedParticipant::Rule(a) => a.speak(stimulus),
        }
    }

    fn listen(&mut self, stimulus: usize, proposal: usize) -> Result<ListenerAction> {
        match self {
            ScriptedParticipant::Replay(s) => s.listen(stimulus, proposal),
            ScriptedParticipant::Rule(a) => a.listen(stimulus, proposal),
        }
    }

    fn outcome(
        &mut self,
        stimulus: usize,
        proposal: usize,
        accepted: bool,
        was_listener: bool,
    ) -> Result<Option<usize>> {
        match self {
            ScriptedParticipant::Replay(s) => s.outcome(stimulus, proposal, accepted, was_listener),
            ScriptedParticipant::Rule(a) => a.outcome(stimulus, proposal, accepted, was_listener),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::{builtin_stimuli, DatasetKind};

    #[test]
    fn exhausted_script_is_a_protocol_error() {
        let mut s = Script::new(vec![], vec![1], vec![]);
        assert_eq!(s.speak(0).unwrap().name, 1);
        assert!(matches!(s.speak(0), Err(Error::Protocol(_))));
        assert!(matches!(s.listen(0, 1), Err(Error::Protocol(_))));
    }

    #[test]
    fn accept_everything_rule() {
        let set = builtin_stimuli(DatasetKind::Hard, 15, 1).unwrap();
        let mut p = ScriptedParticipant::rule(
            AcceptanceModelKind::AffineMh { a: 0.0, b: 1.0 },
            Hyperparams::default(),
            3,
        )
        .unwrap();
        p.categorize(&set).unwrap();
        for n in 0..15 {
            for s in 0..5 {
                assert!(p.listen(n, s).unwrap().accept);
            }
        }
    }
}
