//! The two-participant session: wire frames, the protocol state machine,
//! the append-only JSONL event log with replay, and an in-process driver.

mod driver;
mod log;
mod state;
mod wire;

pub use driver::{run_session, DriverOutcome};
pub use log::{
    engine_log, now_millis, persist_event, replay_file, replay_log, EventLog, EventLogRecord,
    EventPayload, LogOrigin, Replay, ReplayError,
};
pub use state::{
    create_session, dataset_seed, handle_message, state_hash, stimulus_images, Outbound,
    ParticipantState, Phase, Recipient, SessionRegistry, SessionState, Transition,
};
pub use wire::{
    index_label, label_index, Envelope, Role, WireMessage, LABELS, PROTOCOL_VERSION, SERVER_SENDER,
};
