use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::acceptance::{model_acceptance, AcceptanceModelKind};
use super::agent::{LearningAgent, ParameterEstimate};
use super::record::TrialRecord;
use crate::error::{invalid, Result};
use crate::model::{AgentState, Hyperparams};
use crate::rng::{derive_seed, substream};
use crate::stimulus::StimulusSet;

/// Session shape shared by the engine and the live service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub stimuli_per_dataset: usize,
    pub rounds: usize,
    /// Dataset ids in the order they are played.
    pub datasets: Vec<String>,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            stimuli_per_dataset: crate::stimulus::DEFAULT_STIMULI,
            rounds: 3,
            datasets: vec!["hard".into(), "easy".into()],
            seed: 0,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stimuli_per_dataset == 0 || self.rounds == 0 || self.datasets.is_empty() {
            return Err(invalid(
                "stimuli per dataset, rounds and datasets must all be positive",
            ));
        }
        Ok(())
    }

    /// Listener decisions each participant makes on one dataset.
    pub fn decisions_per_participant(&self) -> usize {
        self.stimuli_per_dataset * self.rounds
    }

    /// Exchanges (both roles) on one dataset.
    pub fn exchanges_per_dataset(&self) -> usize {
        2 * self.decisions_per_participant()
    }
}

/// One exchange slot: who speaks about which stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub round: usize,
    /// Participant slot (0 or 1) acting as speaker.
    pub speaker: usize,
    pub stimulus: usize,
}

/// Turn order for one dataset. Every round each participant names every
/// stimulus once, in an order reshuffled per round and per speaker; speakers
/// alternate turn by turn starting with slot 0.
pub fn turn_schedule(stimuli: usize, rounds: usize, seed: u64) -> Vec<Turn> {
    let mut turns = Vec::with_capacity(2 * stimuli * rounds);
    for round in 0..rounds {
        let orders: [Vec<usize>; 2] = std::array::from_fn(|slot| {
            let mut order: Vec<usize> = (0..stimuli).collect();
            order.shuffle(&mut substream(seed, (2 * round + slot) as u64));
            order
        });
        for i in 0..stimuli {
            for (slot, order) in orders.iter().enumerate() {
                turns.push(Turn {
                    round,
                    speaker: slot,
                    stimulus: order[i],
                });
            }
        }
    }
    turns
}

/// When agents re-estimate their parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshCadence {
    #[default]
    EveryExchange,
    EveryRound,
}

/// What an accepted proposal does to the speaker's own sign memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakerUpdate {
    /// The speaker keeps the name the listener accepted.
    #[default]
    AdoptOnAcceptance,
    /// Only listeners ever change signs.
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub hyper: Hyperparams,
    pub estimate: ParameterEstimate,
    pub refresh: RefreshCadence,
    pub speaker_update: SpeakerUpdate,
    pub participant_ids: [String; 2],
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            estimate: ParameterEstimate::default(),
            refresh: RefreshCadence::default(),
            speaker_update: SpeakerUpdate::default(),
            participant_ids: ["A".into(), "B".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome {
    pub history: Vec<TrialRecord>,
    pub agents: [AgentState; 2],
}

/// Plays one exchange between `speaker` and `listener` on stimulus `n`.
///
/// The speaker perceives and proposes, the listener perceives, re-estimates
/// (under per-exchange refresh) and judges. On acceptance the listener's sign
/// takes the proposal, and so does the speaker's unless `speaker_update` is
/// [`SpeakerUpdate::Never`]. Rejection changes neither.
#[allow(clippy::too_many_arguments)]
pub(crate) fn play_exchange<R: Rng + ?Sized>(
    speaker: &mut LearningAgent,
    listener: &mut LearningAgent,
    n: usize,
    model: &AcceptanceModelKind,
    refresh_now: bool,
    speaker_update: SpeakerUpdate,
    rng: &mut R,
) -> Result<ExchangeOutcome> {
    speaker.perceive(n, rng)?;
    let proposal = speaker.propose(n, rng)?;
    let listener_category = listener.perceive(n, rng)?;
    if refresh_now {
        listener.refresh(rng)?;
    }
    let listener_sign = listener.state.signs[n];
    let snapshot = listener.snapshot();
    let terms = listener.judge(n, proposal)?;
    let p = model_acceptance(model, terms.r_mh, terms.numerator, terms.denominator);
    let accepted = rng.random::<f64>() < p.probability;
    if accepted {
        listener.state.signs[n] = proposal;
        if speaker_update == SpeakerUpdate::AdoptOnAcceptance {
            speaker.state.signs[n] = proposal;
        }
    }
    if refresh_now {
        speaker.refresh(rng)?;
        listener.refresh(rng)?;
    }
    Ok(ExchangeOutcome {
        proposal,
        listener_sign,
        listener_category,
        r_mh: terms.r_mh,
        accepted,
        snapshot,
    })
}

pub(crate) struct ExchangeOutcome {
    pub proposal: usize,
    pub listener_sign: usize,
    pub listener_category: usize,
    pub r_mh: f64,
    pub accepted: bool,
    pub snapshot: super::record::KnowledgeSnapshot,
}

/// Runs the naming game over one dataset. Pure in its arguments.
pub fn run_naming_game(
    agents: (AgentState, AgentState),
    stimuli: &StimulusSet,
    config: &GameConfig,
    model: &AcceptanceModelKind,
    options: &EngineOptions,
    seed: u64,
) -> Result<GameOutcome> {
    config.validate()?;
    model.validate()?;
    stimuli.validate()?;
    if stimuli.len() != config.stimuli_per_dataset {
        return Err(invalid(format!(
            "config expects {} stimuli but dataset `{}` has {}",
            config.stimuli_per_dataset,
            stimuli.id,
            stimuli.len()
        )));
    }
    let points = stimuli.points();
    let mut players = [
        LearningAgent::new(
            agents.0,
            points.clone(),
            options.hyper.clone(),
            options.estimate,
        )?,
        LearningAgent::new(agents.1, points, options.hyper.clone(), options.estimate)?,
    ];
    let mut rng = substream(derive_seed(seed, 0x6761_6d65), 0);
    let schedule = turn_schedule(stimuli.len(), config.rounds, seed);
    let mut history = Vec::with_capacity(schedule.len());
    let every_exchange = options.refresh == RefreshCadence::EveryExchange;

    for (i, turn) in schedule.iter().enumerate() {
        let (first, second) = players.split_at_mut(1);
        let (speaker, listener) = if turn.speaker == 0 {
            (&mut first[0], &mut second[0])
        } else {
            (&mut second[0], &mut first[0])
        };
        let out = play_exchange(
            speaker,
            listener,
            turn.stimulus,
            model,
            every_exchange,
            options.speaker_update,
            &mut rng,
        )?;
        history.push(TrialRecord {
            trial_index: i,
            round: turn.round,
            dataset_id: stimuli.id.clone(),
            stimulus_index: turn.stimulus,
            speaker_id: options.participant_ids[turn.speaker].clone(),
            listener_id: options.participant_ids[1 - turn.speaker].clone(),
            speaker_sign: out.proposal,
            listener_sign: out.listener_sign,
            listener_category: Some(out.listener_category),
            r_mh: Some(out.r_mh),
            accepted: out.accepted,
            post_edit: None,
            listener_snapshot: Some(out.snapshot),
        });
        let round_done = schedule
            .get(i + 1)
            .is_none_or(|next| next.round != turn.round);
        if !every_exchange && round_done {
            for p in players.iter_mut() {
                p.refresh(&mut rng)?;
            }
        }
    }

    let [a, b] = players;
    Ok(GameOutcome {
        history,
        agents: [a.state, b.state],
    })
}

/// Fraction of stimuli on which the two agents hold the same sign.
pub fn sign_agreement(a: &AgentState, b: &AgentState) -> Result<f64> {
    if a.signs.len() != b.signs.len() {
        return Err(invalid("agents hold different numbers of stimuli"));
    }
    if a.signs.is_empty() {
        return Ok(1.0);
    }
    let same = a.signs.iter().zip(&b.signs).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.signs.len() as f64)
}
