//! Discrete-event engine: arrivals, link transmission, FIFO queueing,
//! processing and completion, with a policy hook at each task's receiving UAV.

mod arrivals;
mod engine;
mod event;
mod link;
mod trace;

pub use arrivals::generate_arrivals;
pub use engine::{
    run, CompletionOutcome, DecisionRecord, OffloadingPolicy, RunOutcome, RunSeeds, Snapshot,
};
pub use event::{Event, EventKind, EventQueue};
pub use link::LinkDelayModel;
pub use trace::{read_jsonl, write_jsonl, LedgerSnapshot, TraceRecord};
