use std::collections::VecDeque;

use super::log::{EventLogRecord, EventPayload, LogOrigin};
use super::state::{create_session, handle_message, Recipient, SessionState};
use super::wire::{index_label, label_index, Envelope, Role, WireMessage};
use crate::engine::{GameConfig, Participant, TrialRecord};
use crate::error::{Error, Result};
use crate::stimulus::StimulusSet;

/// Everything a driven session produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverOutcome {
    pub state: SessionState,
    pub log: Vec<EventLogRecord>,
    pub trials: Vec<TrialRecord>,
    /// Server frames delivered to each participant, in order.
    pub delivered: [Vec<WireMessage>; 2],
}

struct Seat<'a> {
    id: String,
    participant: &'a mut dyn Participant,
    sequence: u64,
    stimulus: Option<usize>,
    proposal: Option<usize>,
}

/// Plays a whole session between two in-process participants, routing every
/// frame through [`handle_message`] as a server would.
pub fn run_session(
    session_id: &str,
    config: GameConfig,
    datasets: Vec<StimulusSet>,
    participants: [(&str, &mut dyn Participant); 2],
    mut clock: impl FnMut() -> u64,
) -> Result<DriverOutcome> {
    let mut state = create_session(session_id, config.clone(), datasets.clone())?;
    let mut log = Vec::new();
    let push_log = |payload: EventPayload, log: &mut Vec<EventLogRecord>, ts: u64| {
        let sequence = log.len() as u64;
        log.push(EventLogRecord {
            timestamp: ts,
            session_id: session_id.to_string(),
            sequence,
            payload,
        });
    };
    push_log(
        EventPayload::Created {
            config,
            datasets,
            origin: LogOrigin::Session,
        },
        &mut log,
        clock(),
    );

    let [(id0, p0), (id1, p1)] = participants;
    let mut seats = [
        Seat {
            id: id0.to_string(),
            participant: p0,
            sequence: 0,
            stimulus: None,
            proposal: None,
        },
        Seat {
            id: id1.to_string(),
            participant: p1,
            sequence: 0,
            stimulus: None,
            proposal: None,
        },
    ];
    let mut delivered: [Vec<WireMessage>; 2] = Default::default();
    let mut trials = Vec::new();
    let mut inbox: VecDeque<Envelope> = VecDeque::new();
    for seat in seats.iter_mut() {
        let id = seat.id.clone();
        send(
            &mut inbox,
            seat,
            session_id,
            WireMessage::Join { participant: id },
        );
    }

    while let Some(env) = inbox.pop_front() {
        let t = handle_message(&state, &env);
        if let Some(message) = t.rejected {
            return Err(Error::Protocol(format!(
                "{} frame {} from {}: {message}",
                env.message.kind(),
                env.sequence,
                env.sender
            )));
        }
        state = t.state;
        for event in t.events {
            if let EventPayload::Trial(trial) = &event {
                trials.push(trial.clone());
            }
            push_log(event, &mut log, clock());
        }
        for out in t.outbound {
            let targets: Vec<usize> = match &out.to {
                Recipient::All => vec![0, 1],
                Recipient::Participant(id) => {
                    seats.iter().position(|s| &s.id == id).into_iter().collect()
                }
            };
            for slot in targets {
                delivered[slot].push(out.message.clone());
                react(&mut inbox, &mut seats[slot], session_id, &out.message)?;
            }
        }
    }
    if !state.is_complete() {
        return Err(Error::Protocol("session stalled before completion".into()));
    }
    Ok(DriverOutcome {
        state,
        log,
        trials,
        delivered,
    })
}

fn send(
    inbox: &mut VecDeque<Envelope>,
    seat: &mut Seat<'_>,
    session_id: &str,
    message: WireMessage,
) {
    inbox.push_back(Envelope::new(
        session_id,
        seat.sequence,
        seat.id.clone(),
        message,
    ));
    seat.sequence += 1;
}

fn labels(indices: &[usize]) -> Result<Vec<String>> {
    indices
        .iter()
        .map(|&i| index_label(i).map(str::to_string))
        .collect()
}

fn edit(stimulus: usize, category: usize) -> Result<WireMessage> {
    Ok(WireMessage::EditCategorization {
        stimulus,
        label: index_label(category)?.to_string(),
    })
}

fn react(
    inbox: &mut VecDeque<Envelope>,
    seat: &mut Seat<'_>,
    session_id: &str,
    message: &WireMessage,
) -> Result<()> {
    match message {
        WireMessage::StimulusSet { manifest, .. } => {
            let sub = seat.participant.categorize(manifest)?;
            let reply = WireMessage::SubmitInitialCategorization {
                dataset_id: manifest.id.clone(),
                labels: labels(&sub.categories)?,
                signs: sub.signs.as_deref().map(labels).transpose()?,
            };
            send(inbox, seat, session_id, reply);
        }
        WireMessage::ShowStimulus { index, role, .. } => {
            seat.stimulus = Some(*index);
            seat.proposal = None;
            if *role == Role::Speaker {
                let action = seat.participant.speak(*index)?;
                if let Some(c) = action.edit {
                    send(inbox, seat, session_id, edit(*index, c)?);
                }
                seat.proposal = Some(action.name);
                send(
                    inbox,
                    seat,
                    session_id,
                    WireMessage::ProposeName {
                        label: index_label(action.name)?.to_string(),
                    },
                );
            }
        }
        WireMessage::ProposeName { label } => {
            let stimulus = seat
                .stimulus
                .ok_or_else(|| Error::Protocol("name proposed before any stimulus".into()))?;
            let proposal = label_index(label)?;
            let action = seat.participant.listen(stimulus, proposal)?;
            if let Some(c) = action.edit {
                send(inbox, seat, session_id, edit(stimulus, c)?);
            }
            send(
                inbox,
                seat,
                session_id,
                WireMessage::Decision {
                    accept: action.accept,
                },
            );
            if let Some(c) = seat
                .participant
                .outcome(stimulus, proposal, action.accept, true)?
            {
                send(inbox, seat, session_id, edit(stimulus, c)?);
            }
            send(inbox, seat, session_id, WireMessage::TurnAdvance {});
        }
        WireMessage::Decision { accept } => {
            let (Some(stimulus), Some(proposal)) = (seat.stimulus, seat.proposal) else {
                return Err(Error::Protocol(
                    "decision arrived for a turn this side did not speak".into(),
                ));
            };
            seat.participant
                .outcome(stimulus, proposal, *accept, false)?;
        }
        _ => {}
    }
    Ok(())
}
