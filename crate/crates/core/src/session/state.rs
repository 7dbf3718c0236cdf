use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::log::EventPayload;
use super::wire::{index_label, label_index, Envelope, Role, WireMessage, PROTOCOL_VERSION};
use crate::color::patch_file_name;
use crate::engine::{turn_schedule, GameConfig, KnowledgeSnapshot, TrialRecord, Turn};
use crate::error::{invalid, Error, Result};
use crate::rng::derive_seed;
use crate::stimulus::StimulusSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Lobby,
    Initialization {
        dataset: usize,
    },
    NamingTurn {
        speaker_id: String,
        stimulus_index: usize,
        round: usize,
    },
    AwaitDecision {
        speaker_id: String,
        stimulus_index: usize,
        round: usize,
        proposal: usize,
    },
    /// The listener has decided and may still re-categorize before advancing.
    AwaitEdit {
        pending: Box<TrialRecord>,
    },
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantState {
    pub id: String,
    /// Highest applied sequence number.
    pub last_sequence: u64,
    /// Categorization of the current dataset; empty until submitted.
    pub categories: Vec<usize>,
    /// Sign memory over the current dataset.
    pub signs: Vec<usize>,
    /// Listener decisions made, per dataset.
    pub decisions: Vec<usize>,
}

impl ParticipantState {
    fn submitted(&self) -> bool {
        !self.categories.is_empty()
    }

    fn snapshot(&self) -> KnowledgeSnapshot {
        KnowledgeSnapshot {
            categories: self.categories.clone(),
            signs: self.signs.clone(),
        }
    }
}

/// The whole state of one session. Transitions are pure: see [`handle_message`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub config: GameConfig,
    pub datasets: Vec<StimulusSet>,
    pub phase: Phase,
    /// In join order; the first to join speaks first.
    pub participants: Vec<ParticipantState>,
    pub dataset_index: usize,
    /// Exchange schedule of the current dataset.
    pub schedule: Vec<Turn>,
    pub turn_index: usize,
    /// Decisions so far over all datasets.
    pub trial_counter: usize,
}

impl SessionState {
    pub fn participant(&self, id: &str) -> Option<&ParticipantState> {
        self.participants.iter().find(|p| p.id == id)
    }

    fn slot(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.id == id)
    }

    pub fn current_dataset(&self) -> Option<&StimulusSet> {
        self.datasets.get(self.dataset_index)
    }

    pub fn is_complete(&self) -> bool {
        self.phase == Phase::Complete
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("session state serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

pub fn state_hash(state: &SessionState) -> String {
    state.hash()
}

/// Seed of the exchange order on dataset `index`.
pub fn dataset_seed(session_seed: u64, index: usize) -> u64 {
    derive_seed(session_seed, index as u64 + 1)
}

/// A new session waiting in the lobby.
pub fn create_session(
    session_id: &str,
    config: GameConfig,
    datasets: Vec<StimulusSet>,
) -> Result<SessionState> {
    if session_id.is_empty() {
        return Err(invalid("session id must not be empty"));
    }
    config.validate()?;
    if datasets.len() != config.datasets.len() {
        return Err(invalid(format!(
            "config lists {} datasets but {} manifests were given",
            config.datasets.len(),
            datasets.len()
        )));
    }
    for (want, set) in config.datasets.iter().zip(&datasets) {
        if *want != set.id {
            return Err(invalid(format!(
                "expected dataset {want:?}, got {:?}",
                set.id
            )));
        }
        set.validate()?;
        if set.len() != config.stimuli_per_dataset {
            return Err(invalid(format!(
                "dataset {:?} has {} stimuli, config expects {}",
                set.id,
                set.len(),
                config.stimuli_per_dataset
            )));
        }
    }
    Ok(SessionState {
        session_id: session_id.to_string(),
        config,
        datasets,
        phase: Phase::Lobby,
        participants: Vec::new(),
        dataset_index: 0,
        schedule: Vec::new(),
        turn_index: 0,
        trial_counter: 0,
    })
}

/// Sessions by id; creating an id twice fails.
#[derive(Debug, Clone, Default)]
pub struct SessionRegistry {
    sessions: BTreeMap<String, SessionState>,
}

impl SessionRegistry {
    pub fn create(
        &mut self,
        session_id: &str,
        config: GameConfig,
        datasets: Vec<StimulusSet>,
    ) -> Result<&SessionState> {
        if self.sessions.contains_key(session_id) {
            return Err(invalid(format!("session {session_id:?} already exists")));
        }
        let state = create_session(session_id, config, datasets)?;
        Ok(self.sessions.entry(session_id.to_string()).or_insert(state))
    }

    pub fn get(&self, session_id: &str) -> Option<&SessionState> {
        self.sessions.get(session_id)
    }

    pub fn replace(&mut self, state: SessionState) {
        self.sessions.insert(state.session_id.clone(), state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    Participant(String),
    All,
}

/// A server frame before the transport numbers it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: Recipient,
    pub message: WireMessage,
}

impl Outbound {
    fn to(id: &str, message: WireMessage) -> Self {
        Self {
            to: Recipient::Participant(id.to_string()),
            message,
        }
    }

    fn all(message: WireMessage) -> Self {
        Self {
            to: Recipient::All,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SessionState,
    pub outbound: Vec<Outbound>,
    /// Records to append to the event log, in order.
    pub events: Vec<EventPayload>,
    /// Why the frame was refused; the state is then unchanged.
    pub rejected: Option<String>,
}

impl Transition {
    fn reject(state: &SessionState, env: &Envelope, message: String) -> Self {
        Self {
            state: state.clone(),
            outbound: vec![Outbound::to(
                &env.sender,
                WireMessage::ProtocolError {
                    sequence: env.sequence,
                    message: message.clone(),
                },
            )],
            events: Vec::new(),
            rejected: Some(message),
        }
    }
}

/// Applies one client frame.
///
/// Frames from a sender must be numbered 0, 1, 2, ...; a repeated number is
/// acknowledged again without effect and a skipped number is refused. Any
/// refused frame leaves the state untouched and produces a `protocol_error`
/// reply to its sender.
pub fn handle_message(state: &SessionState, env: &Envelope) -> Transition {
    if env.session_id != state.session_id {
        return Transition::reject(
            state,
            env,
            format!(
                "frame is for session {:?}, this is {:?}",
                env.session_id, state.session_id
            ),
        );
    }
    if env.version != PROTOCOL_VERSION {
        return Transition::reject(
            state,
            env,
            format!("unsupported protocol version {}", env.version),
        );
    }
    match state.participant(&env.sender) {
        Some(p) => {
            if env.sequence <= p.last_sequence {
                return Transition {
                    state: state.clone(),
                    outbound: vec![Outbound::to(
                        &env.sender,
                        WireMessage::Ack {
                            sequence: env.sequence,
                        },
                    )],
                    events: Vec::new(),
                    rejected: None,
                };
            }
            if env.sequence != p.last_sequence + 1 {
                return Transition::reject(
                    state,
                    env,
                    format!(
                        "sequence gap: expected {}, got {}",
                        p.last_sequence + 1,
                        env.sequence
                    ),
                );
            }
        }
        None => {
            if !matches!(env.message, WireMessage::Join { .. }) {
                return Transition::reject(
                    state,
                    env,
                    format!("{:?} has not joined this session", env.sender),
                );
            }
            if env.sequence != 0 {
                return Transition::reject(
                    state,
                    env,
                    format!("first frame must have sequence 0, got {}", env.sequence),
                );
            }
        }
    }

    let mut next = state.clone();
    let mut outbound = vec![Outbound::to(
        &env.sender,
        WireMessage::Ack {
            sequence: env.sequence,
        },
    )];
    let mut events = vec![EventPayload::Message(env.clone())];
    if let Err(e) = apply(&mut next, env, &mut outbound, &mut events) {
        let message = match e {
            Error::Protocol(m) | Error::Validation(m) => m,
            other => other.to_string(),
        };
        return Transition::reject(state, env, message);
    }
    if let Some(slot) = next.slot(&env.sender) {
        next.participants[slot].last_sequence = env.sequence;
    }
    Transition {
        state: next,
        outbound,
        events,
        rejected: None,
    }
}

fn protocol(message: impl Into<String>) -> Error {
    Error::Protocol(message.into())
}

fn apply(
    s: &mut SessionState,
    env: &Envelope,
    out: &mut Vec<Outbound>,
    events: &mut Vec<EventPayload>,
) -> Result<()> {
    let sender = env.sender.as_str();
    match &env.message {
        WireMessage::Join { participant } => {
            if participant != sender {
                return Err(protocol(format!(
                    "join for {participant:?} sent by {sender:?}"
                )));
            }
            if s.participant(sender).is_some() {
                // reconnect: repeat what this participant is waiting on
                out.extend(current_prompt(s, sender));
                return Ok(());
            }
            if s.phase != Phase::Lobby || s.participants.len() >= 2 {
                return Err(protocol("session is full"));
            }
            s.participants.push(ParticipantState {
                id: sender.to_string(),
                last_sequence: 0,
                categories: Vec::new(),
                signs: Vec::new(),
                decisions: vec![0; s.datasets.len()],
            });
            if s.participants.len() == 2 {
                start_dataset(s, 0, out);
            }
            Ok(())
        }
        WireMessage::SubmitInitialCategorization {
            dataset_id,
            labels,
            signs,
        } => {
            let Phase::Initialization { dataset } = s.phase else {
                return Err(protocol(
                    "initial categorization is only accepted during initialization",
                ));
            };
            let set = &s.datasets[dataset];
            if *dataset_id != set.id {
                return Err(protocol(format!(
                    "categorization is for {dataset_id:?}, current dataset is {:?}",
                    set.id
                )));
            }
            let n = set.len();
            let categories = parse_labels(labels, n)?;
            let signs = match signs {
                Some(signs) => parse_labels(signs, n)?,
                None => categories.clone(),
            };
            let slot = s.slot(sender).expect("joined");
            s.participants[slot].categories = categories;
            s.participants[slot].signs = signs;
            if s.participants.iter().all(ParticipantState::submitted) {
                s.turn_index = 0;
                start_turn(s, out);
            }
            Ok(())
        }
        WireMessage::ProposeName { label } => {
            let Phase::NamingTurn {
                speaker_id,
                stimulus_index,
                round,
            } = s.phase.clone()
            else {
                return Err(protocol("no name is expected now"));
            };
            if speaker_id != sender {
                return Err(protocol(format!("{sender:?} is not the speaker")));
            }
            let proposal = label_index(label)?;
            let listener = other(s, sender);
            s.phase = Phase::AwaitDecision {
                speaker_id,
                stimulus_index,
                round,
                proposal,
            };
            out.push(Outbound::to(
                &listener,
                WireMessage::ProposeName {
                    label: label.clone(),
                },
            ));
            Ok(())
        }
        WireMessage::Decision { accept } => {
            let Phase::AwaitDecision {
                speaker_id,
                stimulus_index,
                round,
                proposal,
            } = s.phase.clone()
            else {
                return Err(protocol("no decision is expected now"));
            };
            if speaker_id == sender {
                return Err(protocol(format!(
                    "{sender:?} is the speaker, not the listener"
                )));
            }
            let li = s.slot(sender).expect("joined");
            let sp = s.slot(&speaker_id).expect("joined");
            let listener = &s.participants[li];
            let pending = TrialRecord {
                trial_index: s.trial_counter,
                round,
                dataset_id: s.datasets[s.dataset_index].id.clone(),
                stimulus_index,
                speaker_id: speaker_id.clone(),
                listener_id: sender.to_string(),
                speaker_sign: proposal,
                listener_sign: listener.signs[stimulus_index],
                listener_category: Some(listener.categories[stimulus_index]),
                r_mh: None,
                accepted: *accept,
                post_edit: None,
                listener_snapshot: Some(listener.snapshot()),
            };
            if *accept {
                s.participants[li].signs[stimulus_index] = proposal;
                s.participants[sp].signs[stimulus_index] = proposal;
            }
            let d = s.dataset_index;
            s.participants[li].decisions[d] += 1;
            s.phase = Phase::AwaitEdit {
                pending: Box::new(pending),
            };
            out.push(Outbound::to(
                &speaker_id,
                WireMessage::Decision { accept: *accept },
            ));
            Ok(())
        }
        WireMessage::EditCategorization { stimulus, label } => {
            match s.phase {
                Phase::Lobby | Phase::Complete => {
                    return Err(protocol("no dataset is being played"))
                }
                Phase::Initialization { .. }
                    if !s.participant(sender).expect("joined").submitted() =>
                {
                    return Err(protocol("submit the initial categorization first"));
                }
                _ => {}
            }
            let n = s.datasets[s.dataset_index].len();
            if *stimulus >= n {
                return Err(protocol(format!(
                    "stimulus {stimulus} out of range (0..{n})"
                )));
            }
            let category = label_index(label)?;
            let slot = s.slot(sender).expect("joined");
            s.participants[slot].categories[*stimulus] = category;
            if let Phase::AwaitEdit { pending } = &mut s.phase {
                if pending.listener_id == sender && pending.stimulus_index == *stimulus {
                    pending.post_edit = Some(category);
                    out.push(Outbound::to(
                        sender,
                        WireMessage::EditWarning {
                            stimulus: *stimulus,
                        },
                    ));
                }
            }
            Ok(())
        }
        WireMessage::TurnAdvance {} => {
            let Phase::AwaitEdit { pending } = &s.phase else {
                return Err(protocol("nothing to advance from"));
            };
            if pending.listener_id != sender {
                return Err(protocol(format!(
                    "only the listener {:?} can advance",
                    pending.listener_id
                )));
            }
            events.push(EventPayload::Trial((**pending).clone()));
            s.trial_counter += 1;
            s.turn_index += 1;
            if s.turn_index < s.schedule.len() {
                start_turn(s, out);
            } else if s.dataset_index + 1 < s.datasets.len() {
                let next = s.dataset_index + 1;
                start_dataset(s, next, out);
            } else {
                s.phase = Phase::Complete;
                out.push(Outbound::all(WireMessage::SessionComplete {}));
            }
            Ok(())
        }
        WireMessage::StimulusSet { .. }
        | WireMessage::ShowStimulus { .. }
        | WireMessage::EditWarning { .. }
        | WireMessage::SessionComplete {}
        | WireMessage::Ack { .. }
        | WireMessage::ProtocolError { .. } => Err(protocol(format!(
            "{} frames are sent by the server only",
            env.message.kind()
        ))),
    }
}

fn parse_labels(labels: &[String], n: usize) -> Result<Vec<usize>> {
    if labels.len() != n {
        return Err(protocol(format!(
            "expected {n} labels, got {}",
            labels.len()
        )));
    }
    labels.iter().map(|l| label_index(l)).collect()
}

fn other(s: &SessionState, id: &str) -> String {
    s.participants
        .iter()
        .find(|p| p.id != id)
        .expect("two participants")
        .id
        .clone()
}

/// Image file names of a dataset's stimuli, as served next to the manifest.
pub fn stimulus_images(set: &StimulusSet) -> Vec<String> {
    (0..set.len())
        .map(|i| patch_file_name(&set.id, i))
        .collect()
}

fn stimulus_set_message(set: &StimulusSet) -> WireMessage {
    WireMessage::StimulusSet {
        manifest: set.clone(),
        images: stimulus_images(set),
    }
}

fn start_dataset(s: &mut SessionState, index: usize, out: &mut Vec<Outbound>) {
    s.dataset_index = index;
    s.schedule = turn_schedule(
        s.datasets[index].len(),
        s.config.rounds,
        dataset_seed(s.config.seed, index),
    );
    s.turn_index = 0;
    for p in &mut s.participants {
        p.categories.clear();
        p.signs.clear();
    }
    s.phase = Phase::Initialization { dataset: index };
    out.push(Outbound::all(stimulus_set_message(&s.datasets[index])));
}

fn show(s: &SessionState, turn: &Turn, role: Role) -> WireMessage {
    WireMessage::ShowStimulus {
        dataset_id: s.datasets[s.dataset_index].id.clone(),
        round: turn.round,
        index: turn.stimulus,
        role,
    }
}

fn start_turn(s: &mut SessionState, out: &mut Vec<Outbound>) {
    let turn = s.schedule[s.turn_index];
    let speaker = s.participants[turn.speaker].id.clone();
    let listener = s.participants[1 - turn.speaker].id.clone();
    s.phase = Phase::NamingTurn {
        speaker_id: speaker.clone(),
        stimulus_index: turn.stimulus,
        round: turn.round,
    };
    out.push(Outbound::to(&speaker, show(s, &turn, Role::Speaker)));
    out.push(Outbound::to(&listener, show(s, &turn, Role::Listener)));
}

/// Frames a reconnecting participant needs to pick up where it left off.
fn current_prompt(s: &SessionState, id: &str) -> Vec<Outbound> {
    let mut out = Vec::new();
    match &s.phase {
        Phase::Lobby | Phase::AwaitEdit { .. } => {}
        Phase::Initialization { dataset } => {
            if !s.participant(id).is_some_and(ParticipantState::submitted) {
                out.push(Outbound::to(
                    id,
                    stimulus_set_message(&s.datasets[*dataset]),
                ));
            }
        }
        Phase::NamingTurn { speaker_id, .. } => {
            let role = if speaker_id == id {
                Role::Speaker
            } else {
                Role::Listener
            };
            out.push(Outbound::to(id, show(s, &s.schedule[s.turn_index], role)));
        }
        Phase::AwaitDecision {
            speaker_id,
            proposal,
            ..
        } => {
            let role = if speaker_id == id {
                Role::Speaker
            } else {
                Role::Listener
            };
            out.push(Outbound::to(id, show(s, &s.schedule[s.turn_index], role)));
            if role == Role::Listener {
                let label = index_label(*proposal).expect("proposal parsed from a label");
                out.push(Outbound::to(
                    id,
                    WireMessage::ProposeName {
                        label: label.to_string(),
                    },
                ));
            }
        }
        Phase::Complete => out.push(Outbound::to(id, WireMessage::SessionComplete {})),
    }
    out
}
