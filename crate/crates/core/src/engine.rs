//! Deterministic event calendar.
//!
//! Events fire in time order; events scheduled for the same instant fire in
//! the order they were inserted.

use crate::time::SimTime;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Handle returned by [`Scheduler::schedule`]; also the tie-break key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

struct Entry<E> {
    at: SimTime,
    id: EventId,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.id == other.id
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed so the max-heap pops the earliest (time, insertion) pair.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub struct Scheduler<E> {
    now: SimTime,
    next_id: u64,
    heap: BinaryHeap<Entry<E>>,
    fired: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_id: 0,
            heap: BinaryHeap::new(),
            fired: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events popped so far.
    pub fn fired(&self) -> u64 {
        self.fired
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Schedules `event` at absolute time `at`.
    ///
    /// Scheduling in the past is a contract violation and panics.
    pub fn schedule(&mut self, at: SimTime, event: E) -> EventId {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={at} now={}",
            self.now
        );
        let id = EventId(self.next_id);
        self.next_id += 1;
        self.heap.push(Entry { at, id, event });
        id
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventId {
        let at = self.now + delay;
        self.schedule(at, event)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
    }

    /// Pops the next event if it fires at or before `until`, advancing the clock.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        match self.heap.peek() {
            Some(top) if top.at <= until => {}
            _ => return None,
        }
        let Entry { at, event, .. } = self.heap.pop()?;
        debug_assert!(at >= self.now);
        self.now = at;
        self.fired += 1;
        Some((at, event))
    }

    /// Runs the handler for every event up to and including `until`, then
    /// parks the clock at `until`.
    pub fn run_until<F>(&mut self, until: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        while let Some((at, ev)) = self.pop_until(until) {
            handler(self, at, ev);
        }
        if until > self.now && until != SimTime::MAX {
            self.now = until;
        }
    }
}
