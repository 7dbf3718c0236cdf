use std::io::Cursor;

use mhng_core::engine::{
    AcceptanceModelKind, AgentParticipant, GameConfig, InitialSubmission, Script,
};
use mhng_core::model::Hyperparams;
use mhng_core::session::{
    create_session, engine_log, handle_message, persist_event, replay_log, run_session, Envelope,
    EventLogRecord, EventPayload, Phase, Recipient, ReplayError, Role, SessionRegistry,
    SessionState, WireMessage,
};
use mhng_core::stimulus::{builtin_stimuli, DatasetKind};

fn small_config(n: usize) -> (GameConfig, Vec<mhng_core::stimulus::StimulusSet>) {
    let config = GameConfig {
        stimuli_per_dataset: n,
        rounds: 1,
        datasets: vec!["easy".into()],
        seed: 7,
    };
    (
        config,
        vec![builtin_stimuli(DatasetKind::Easy, n, 3).unwrap()],
    )
}

fn env(state: &SessionState, seq: u64, sender: &str, message: WireMessage) -> Envelope {
    Envelope::new(state.session_id.clone(), seq, sender, message)
}

fn step(
    state: SessionState,
    seq: u64,
    sender: &str,
    message: WireMessage,
) -> (SessionState, mhng_core::session::Transition) {
    let t = handle_message(&state, &env(&state, seq, sender, message));
    assert!(t.rejected.is_none(), "{:?}", t.rejected);
    (t.state.clone(), t)
}

fn labels(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Both joined and categorized; returns the state at the first naming turn.
fn started() -> SessionState {
    let (config, sets) = small_config(3);
    let s = create_session("s1", config, sets).unwrap();
    let (s, _) = step(
        s,
        0,
        "p1",
        WireMessage::Join {
            participant: "p1".into(),
        },
    );
    let (s, t) = step(
        s,
        0,
        "p2",
        WireMessage::Join {
            participant: "p2".into(),
        },
    );
    assert!(t
        .outbound
        .iter()
        .any(|o| o.to == Recipient::All && matches!(o.message, WireMessage::StimulusSet { .. })));
    let cat = |l: &[&str]| WireMessage::SubmitInitialCategorization {
        dataset_id: "easy".into(),
        labels: labels(l),
        signs: None,
    };
    let (s, _) = step(s, 1, "p1", cat(&["A", "B", "C"]));
    let (s, t) = step(s, 1, "p2", cat(&["C", "C", "A"]));
    assert_eq!(
        t.outbound
            .iter()
            .filter(|o| matches!(o.message, WireMessage::ShowStimulus { .. }))
            .count(),
        2
    );
    s
}

fn speaker_and_listener(s: &SessionState) -> (String, String, usize) {
    let Phase::NamingTurn {
        speaker_id,
        stimulus_index,
        ..
    } = &s.phase
    else {
        panic!("{:?}", s.phase)
    };
    let listener = s
        .participants
        .iter()
        .find(|p| &p.id != speaker_id)
        .unwrap()
        .id
        .clone();
    (speaker_id.clone(), listener, *stimulus_index)
}

#[test]
fn scripted_exchange_and_trial_record() {
    let s = started();
    assert_eq!(s.participants[0].id, "p1");
    let (speaker, listener, stim) = speaker_and_listener(&s);
    assert_eq!(speaker, "p1");
    let before = s.participant(&listener).unwrap().clone();
    let (s, t) = step(
        s,
        2,
        &speaker,
        WireMessage::ProposeName { label: "E".into() },
    );
    assert!(t
        .outbound
        .iter()
        .any(|o| o.to == Recipient::Participant(listener.clone())
            && o.message == WireMessage::ProposeName { label: "E".into() }));
    let (s, t) = step(s, 2, &listener, WireMessage::Decision { accept: true });
    assert!(t
        .outbound
        .iter()
        .any(|o| o.to == Recipient::Participant(speaker.clone())
            && o.message == WireMessage::Decision { accept: true }));
    assert_eq!(s.participant(&listener).unwrap().signs[stim], 4);
    assert_eq!(s.participant(&speaker).unwrap().signs[stim], 4);
    let (s, t) = step(s, 3, &listener, WireMessage::TurnAdvance {});
    let trial = t
        .events
        .iter()
        .find_map(|e| {
            if let EventPayload::Trial(tr) = e {
                Some(tr.clone())
            } else {
                None
            }
        })
        .expect("trial emitted at advance");
    assert_eq!(trial.trial_index, 0);
    assert_eq!(trial.speaker_sign, 4);
    assert_eq!(trial.listener_sign, before.signs[stim]);
    assert_eq!(trial.listener_category, Some(before.categories[stim]));
    assert!(trial.accepted);
    assert_eq!(trial.r_mh, None);
    let snap = trial.listener_snapshot.unwrap();
    assert_eq!(snap.categories, before.categories);
    assert_eq!(snap.signs, before.signs);
    // the next turn belongs to the other participant
    assert_eq!(speaker_and_listener(&s).0, listener);
}

#[test]
fn role_guards() {
    let s = started();
    let (speaker, listener, _) = speaker_and_listener(&s);
    let t = handle_message(
        &s,
        &env(
            &s,
            2,
            &listener,
            WireMessage::ProposeName { label: "A".into() },
        ),
    );
    assert!(t.rejected.unwrap().contains("not the speaker"));
    assert_eq!(t.state, s);
    assert!(matches!(
        t.outbound[0].message,
        WireMessage::ProtocolError { sequence: 2, .. }
    ));
    let t = handle_message(
        &s,
        &env(&s, 2, &speaker, WireMessage::Decision { accept: true }),
    );
    assert!(t.rejected.is_some());
    let (s, _) = step(
        s,
        2,
        &speaker,
        WireMessage::ProposeName { label: "A".into() },
    );
    let t = handle_message(
        &s,
        &env(&s, 3, &speaker, WireMessage::Decision { accept: true }),
    );
    assert!(t.rejected.unwrap().contains("speaker"));
    let t = handle_message(&s, &env(&s, 3, &speaker, WireMessage::TurnAdvance {}));
    assert!(t.rejected.is_some());
    let t = handle_message(
        &s,
        &env(
            &s,
            2,
            &listener,
            WireMessage::ProposeName { label: "Z".into() },
        ),
    );
    assert!(t.rejected.is_some());
}

#[test]
fn duplicates_are_idempotent_and_gaps_refused() {
    let s = started();
    let (speaker, _, _) = speaker_and_listener(&s);
    let dup = handle_message(
        &s,
        &env(
            &s,
            1,
            &speaker,
            WireMessage::ProposeName { label: "A".into() },
        ),
    );
    assert!(dup.rejected.is_none());
    assert_eq!(dup.state, s);
    assert!(dup.events.is_empty());
    assert_eq!(dup.outbound[0].message, WireMessage::Ack { sequence: 1 });
    let gap = handle_message(
        &s,
        &env(
            &s,
            5,
            &speaker,
            WireMessage::ProposeName { label: "A".into() },
        ),
    );
    assert!(gap.rejected.unwrap().contains("expected 2"));
    assert_eq!(gap.state, s);
}

#[test]
fn post_decision_edit_warns_and_is_recorded() {
    let s = started();
    let (speaker, listener, stim) = speaker_and_listener(&s);
    let (s, _) = step(
        s,
        2,
        &speaker,
        WireMessage::ProposeName { label: "B".into() },
    );
    let (s, _) = step(s, 2, &listener, WireMessage::Decision { accept: false });
    let (s, t) = step(
        s,
        3,
        &listener,
        WireMessage::EditCategorization {
            stimulus: stim,
            label: "D".into(),
        },
    );
    assert!(t
        .outbound
        .iter()
        .any(|o| o.message == WireMessage::EditWarning { stimulus: stim }));
    // an edit elsewhere is not a post-decision edit
    let other = (stim + 1) % 3;
    let (s, t) = step(
        s,
        4,
        &listener,
        WireMessage::EditCategorization {
            stimulus: other,
            label: "E".into(),
        },
    );
    assert!(!t
        .outbound
        .iter()
        .any(|o| matches!(o.message, WireMessage::EditWarning { .. })));
    let (_, t) = step(s, 5, &listener, WireMessage::TurnAdvance {});
    let EventPayload::Trial(trial) = t.events.last().unwrap() else {
        panic!()
    };
    assert_eq!(trial.post_edit, Some(3));
    assert!(!trial.accepted);
    // the decision used the pre-edit category
    assert_ne!(trial.listener_category, Some(3));
}

#[test]
fn lobby_rules() {
    let (config, sets) = small_config(3);
    let s = create_session("s1", config.clone(), sets.clone()).unwrap();
    let t = handle_message(&s, &env(&s, 0, "p1", WireMessage::TurnAdvance {}));
    assert!(t.rejected.unwrap().contains("not joined"));
    let t = handle_message(
        &s,
        &env(
            &s,
            0,
            "p1",
            WireMessage::Join {
                participant: "p9".into(),
            },
        ),
    );
    assert!(t.rejected.is_some());
    let wrong = Envelope::new(
        "other",
        0,
        "p1",
        WireMessage::Join {
            participant: "p1".into(),
        },
    );
    assert!(handle_message(&s, &wrong).rejected.is_some());
    let s = started();
    let t = handle_message(
        &s,
        &env(
            &s,
            0,
            "p3",
            WireMessage::Join {
                participant: "p3".into(),
            },
        ),
    );
    assert!(t.rejected.unwrap().contains("full"));
    let t = handle_message(&s, &env(&s, 2, "p1", WireMessage::Ack { sequence: 0 }));
    assert!(t.rejected.is_some());

    let mut registry = SessionRegistry::default();
    registry.create("s1", config.clone(), sets.clone()).unwrap();
    assert!(registry.create("s1", config.clone(), sets.clone()).is_err());
    assert!(create_session(
        "x",
        GameConfig {
            stimuli_per_dataset: 4,
            ..config.clone()
        },
        sets.clone()
    )
    .is_err());
    assert!(create_session(
        "x",
        GameConfig {
            stimuli_per_dataset: 0,
            ..config
        },
        vec![]
    )
    .is_err());
}

#[test]
fn categorization_must_cover_every_stimulus() {
    let (config, sets) = small_config(3);
    let s = create_session("s1", config, sets).unwrap();
    let (s, _) = step(
        s,
        0,
        "p1",
        WireMessage::Join {
            participant: "p1".into(),
        },
    );
    let (s, _) = step(
        s,
        0,
        "p2",
        WireMessage::Join {
            participant: "p2".into(),
        },
    );
    let short = WireMessage::SubmitInitialCategorization {
        dataset_id: "easy".into(),
        labels: labels(&["A"]),
        signs: None,
    };
    assert!(handle_message(&s, &env(&s, 1, "p1", short))
        .rejected
        .is_some());
    let wrong = WireMessage::SubmitInitialCategorization {
        dataset_id: "hard".into(),
        labels: labels(&["A", "A", "A"]),
        signs: None,
    };
    assert!(handle_message(&s, &env(&s, 1, "p1", wrong))
        .rejected
        .is_some());
    let edit = WireMessage::EditCategorization {
        stimulus: 0,
        label: "A".into(),
    };
    assert!(handle_message(&s, &env(&s, 1, "p1", edit))
        .rejected
        .is_some());
}

#[test]
fn reconnect_repeats_the_prompt() {
    let s = started();
    let (speaker, listener, stim) = speaker_and_listener(&s);
    let (s, _) = step(
        s,
        2,
        &speaker,
        WireMessage::ProposeName { label: "C".into() },
    );
    let (_, t) = step(
        s,
        2,
        &listener,
        WireMessage::Join {
            participant: listener.clone(),
        },
    );
    let msgs: Vec<_> = t.outbound.iter().map(|o| o.message.clone()).collect();
    assert!(msgs.iter().any(|m| matches!(m, WireMessage::ShowStimulus { index, role: Role::Listener, .. } if *index == stim)));
    assert!(msgs.contains(&WireMessage::ProposeName { label: "C".into() }));
}

fn scripted_pair(n: usize, turns: usize) -> (Script, Script) {
    let sub = |c: usize| InitialSubmission {
        categories: vec![c; n],
        signs: None,
    };
    let mut a = Script::new(
        vec![sub(0)],
        (0..turns).map(|i| i % 5).collect(),
        (0..turns).map(|i| i % 3 == 0).collect(),
    );
    let b = Script::new(
        vec![sub(1)],
        (0..turns).map(|i| (i + 2) % 5).collect(),
        (0..turns).map(|i| i % 2 == 0).collect(),
    );
    a.post_edits.insert(1, 4);
    (a, b)
}

#[test]
fn driven_session_replays_to_the_same_state() {
    let (config, sets) = small_config(4);
    let (mut a, mut b) = scripted_pair(4, 8);
    let mut tick = 1_000u64;
    let out = run_session("drv", config, sets, [("a", &mut a), ("b", &mut b)], || {
        tick += 5;
        tick
    })
    .unwrap();
    assert!(out.state.is_complete());
    assert_eq!(out.trials.len(), 8);
    assert_eq!(
        out.trials.iter().filter(|t| t.listener_id == "a").count(),
        4
    );
    assert!(out.trials.iter().any(|t| t.post_edit == Some(4)));
    assert!(out.delivered[0].contains(&WireMessage::SessionComplete {}));

    let mut buf = Vec::new();
    for r in &out.log {
        persist_event(&mut buf, r).unwrap();
    }
    let replay = replay_log(Cursor::new(&buf)).unwrap();
    assert!(replay.complete);
    assert_eq!(replay.trials, out.trials);
    assert_eq!(replay.state.hash(), out.state.hash());
    assert_eq!(replay.records, out.log.len());
}

#[test]
fn agent_session_over_two_datasets() {
    let config = GameConfig {
        stimuli_per_dataset: 6,
        rounds: 1,
        datasets: vec!["hard".into(), "easy".into()],
        seed: 11,
    };
    let sets = vec![
        builtin_stimuli(DatasetKind::Hard, 6, 1).unwrap(),
        builtin_stimuli(DatasetKind::Easy, 6, 2).unwrap(),
    ];
    let hyper = Hyperparams::default();
    let mut a = AgentParticipant::new(AcceptanceModelKind::Mh, hyper.clone(), 1).unwrap();
    let mut b = AgentParticipant::new(AcceptanceModelKind::Mh, hyper, 2).unwrap();
    let out = run_session("agents", config, sets, [("a", &mut a), ("b", &mut b)], || 0).unwrap();
    assert_eq!(out.trials.len(), 24);
    assert_eq!(
        out.trials.iter().filter(|t| t.dataset_id == "hard").count(),
        12
    );
    let idx: Vec<usize> = out.trials.iter().map(|t| t.trial_index).collect();
    assert_eq!(idx, (0..24).collect::<Vec<_>>());
    // server-side signs match the agents' own memory
    for (seat, agent) in [(0, &a), (1, &b)] {
        assert_eq!(
            out.state.participants[seat].signs,
            agent.agent().unwrap().state.signs
        );
    }
}

fn driven_log() -> (Vec<EventLogRecord>, Vec<u8>) {
    let (config, sets) = small_config(4);
    let (mut a, mut b) = scripted_pair(4, 8);
    let out = run_session("drv", config, sets, [("a", &mut a), ("b", &mut b)], || 0).unwrap();
    let mut buf = Vec::new();
    for r in &out.log {
        persist_event(&mut buf, r).unwrap();
    }
    (out.log, buf)
}

#[test]
fn truncated_log_keeps_complete_trials_only() {
    let (log, buf) = driven_log();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // cut the fifth trial record in half
    let fifth = log
        .iter()
        .filter(|r| matches!(r.payload, EventPayload::Trial(_)))
        .nth(4)
        .unwrap()
        .sequence as usize;
    let mut cut = lines[..fifth].join("\n");
    cut.push('\n');
    cut.push_str(&lines[fifth][..lines[fifth].len() / 2]);
    match replay_log(Cursor::new(cut)) {
        Err(ReplayError::Truncated {
            line,
            complete_trials,
            ..
        }) => {
            assert_eq!(line, fifth + 1);
            assert_eq!(complete_trials.len(), 4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn sequence_gap_is_reported_with_range() {
    let (_, buf) = driven_log();
    let text = String::from_utf8(buf).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .enumerate()
        .filter(|(i, _)| !(5..=7).contains(i))
        .map(|(_, l)| l)
        .collect();
    match replay_log(Cursor::new(kept.join("\n"))) {
        Err(ReplayError::SequenceGap {
            session_id,
            missing_from,
            missing_to,
        }) => {
            assert_eq!(session_id, "drv");
            assert_eq!((missing_from, missing_to), (5, 7));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tampered_trial_is_detected() {
    let (mut log, _) = driven_log();
    for r in &mut log {
        if let EventPayload::Trial(t) = &mut r.payload {
            t.accepted = !t.accepted;
            break;
        }
    }
    let mut buf = Vec::new();
    for r in &log {
        persist_event(&mut buf, r).unwrap();
    }
    assert!(matches!(
        replay_log(Cursor::new(buf)),
        Err(ReplayError::TrialMismatch { .. })
    ));
}

#[test]
fn log_must_start_with_creation() {
    let (_, buf) = driven_log();
    let text = String::from_utf8(buf).unwrap();
    assert!(matches!(
        replay_log(Cursor::new("")),
        Err(ReplayError::Empty)
    ));
    let rest: Vec<&str> = text.lines().skip(1).collect();
    assert!(replay_log(Cursor::new(rest.join("\n"))).is_err());
}

#[test]
fn incomplete_session_replays_without_claiming_completion() {
    let (_, buf) = driven_log();
    let text = String::from_utf8(buf).unwrap();
    let head: Vec<&str> = text.lines().take(12).collect();
    let replay = replay_log(Cursor::new(head.join("\n"))).unwrap();
    assert!(!replay.complete);
    assert!(!replay.state.is_complete());
}

#[test]
fn engine_export_round_trips() {
    let (config, sets) = small_config(4);
    let (_, buf) = driven_log();
    let trials = replay_log(Cursor::new(buf)).unwrap().trials;
    let records = engine_log("sim", &config, &sets, &trials, 42);
    let mut out = Vec::new();
    for r in &records {
        persist_event(&mut out, r).unwrap();
    }
    let replay = replay_log(Cursor::new(out)).unwrap();
    assert!(replay.complete);
    assert_eq!(replay.trials, trials);
}
