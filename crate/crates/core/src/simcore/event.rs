//! Event set with a total order on (time, kind rank, task id).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::model::TaskId;

/// Event kinds in tie-breaking rank order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TaskArrivalAtUav,
    TaskArrivalAtDestination,
    TaskStartProcessing,
    TaskCompleted,
    SimEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub at: f64,
    pub kind: EventKind,
    /// `None` only for `SimEnd`.
    pub task: Option<TaskId>,
    /// Node the event happens at, where meaningful.
    pub node: Option<usize>,
}

impl Event {
    fn key(&self) -> (f64, EventKind, u32) {
        (self.at, self.kind, self.task.map_or(u32::MAX, |t| t.0))
    }
}

#[derive(Debug)]
struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ka, ia) = self.0.key();
        let (tb, kb, ib) = other.0.key();
        tb.total_cmp(&ta).then(kb.cmp(&ka)).then(ib.cmp(&ia))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Queued>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(event.at.is_finite(), "event time must be finite");
        self.heap.push(Queued(event));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|q| q.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(at: f64, kind: EventKind, task: u32) -> Event {
        Event {
            at,
            kind,
            task: Some(TaskId(task)),
            node: None,
        }
    }

    #[test]
    fn pops_by_time_then_kind_then_task() {
        let mut q = EventQueue::new();
        q.push(ev(1.0, EventKind::TaskCompleted, 0));
        q.push(ev(0.5, EventKind::TaskCompleted, 9));
        q.push(ev(1.0, EventKind::TaskArrivalAtUav, 7));
        q.push(ev(1.0, EventKind::TaskArrivalAtUav, 3));
        q.push(Event {
            at: 1.0,
            kind: EventKind::SimEnd,
            task: None,
            node: None,
        });
        let order: Vec<_> = std::iter::from_fn(|| q.pop())
            .map(|e| (e.at, e.kind, e.task.map(|t| t.0)))
            .collect();
        assert_eq!(
            order,
            vec![
                (0.5, EventKind::TaskCompleted, Some(9)),
                (1.0, EventKind::TaskArrivalAtUav, Some(3)),
                (1.0, EventKind::TaskArrivalAtUav, Some(7)),
                (1.0, EventKind::TaskCompleted, Some(0)),
                (1.0, EventKind::SimEnd, None),
            ]
        );
    }
}
