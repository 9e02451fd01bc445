use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canary::{BugCounters, BugRegistry, RegistrySnapshot};
use crate::fuzzer::ExecObserver;
use crate::targets::BugId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "R")]
    Reach,
    #[serde(rename = "T")]
    Trigger,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::Reach => "R",
            EventKind::Trigger => "T",
        }
    }
}

/// A counter observed nonzero for the first time at a poll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BugEvent {
    pub bug: BugId,
    pub kind: EventKind,
    pub time_s: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PollError {
    #[error("snapshot covers {fresh} bugs, expected {expected}")]
    BugCountMismatch { expected: usize, fresh: usize },
}

/// Max-merges `fresh` into `previous` and reports every counter that goes
/// from zero to nonzero, stamped with the poll time `at`.
pub fn poll_merge(
    previous: &RegistrySnapshot,
    fresh: &RegistrySnapshot,
    at: f64,
) -> Result<(RegistrySnapshot, Vec<BugEvent>), PollError> {
    if previous.counters.len() != fresh.counters.len() {
        return Err(PollError::BugCountMismatch { expected: previous.counters.len(), fresh: fresh.counters.len() });
    }
    let mut events = Vec::new();
    let counters = previous
        .counters
        .iter()
        .zip(&fresh.counters)
        .enumerate()
        .map(|(i, (old, new))| {
            let bug = BugId(i as u32);
            if old.reached == 0 && new.reached > 0 {
                events.push(BugEvent { bug, kind: EventKind::Reach, time_s: at });
            }
            if old.triggered == 0 && new.triggered > 0 {
                events.push(BugEvent { bug, kind: EventKind::Trigger, time_s: at });
            }
            BugCounters { reached: old.reached.max(new.reached), triggered: old.triggered.max(new.triggered) }
        })
        .collect();
    let merged = RegistrySnapshot { timestamp: at, faulty: previous.faulty || fresh.faulty, counters };
    Ok((merged, events))
}

/// Polls a trial's executions at `k * interval` for `k = 1..=ticks`.
///
/// Executions finishing at time `t` are attributed to the first tick at or
/// after `t`.
pub struct TrialMonitor {
    interval: f64,
    ticks: u64,
    next: u64,
    cumulative: RegistrySnapshot,
    pending: RegistrySnapshot,
    events: Vec<BugEvent>,
    skipped_polls: u64,
}

impl TrialMonitor {
    pub fn new(bug_count: usize, interval: f64, ticks: u64) -> Self {
        Self {
            interval,
            ticks,
            next: 1,
            cumulative: RegistrySnapshot::zeroed(bug_count),
            pending: RegistrySnapshot::zeroed(bug_count),
            events: Vec::new(),
            skipped_polls: 0,
        }
    }

    fn tick_time(&self, k: u64) -> f64 {
        k as f64 * self.interval
    }

    /// Offers one execution's final registry state.
    pub fn observe(&mut self, now: f64, fresh: &RegistrySnapshot) {
        self.advance(now);
        match poll_merge(&self.pending, fresh, now) {
            Ok((merged, _)) => self.pending = merged,
            Err(e) => log::warn!("dropping execution snapshot: {e}"),
        }
    }

    /// Runs every poll strictly before `now`. The final tick is left for
    /// [`TrialMonitor::finish`].
    fn advance(&mut self, now: f64) {
        while self.next < self.ticks && self.tick_time(self.next) < now {
            self.poll();
        }
    }

    fn poll(&mut self) {
        let at = self.tick_time(self.next);
        self.next += 1;
        match poll_merge(&self.cumulative, &self.pending, at) {
            Ok((merged, events)) => {
                self.cumulative = merged;
                self.events.extend(events);
            }
            Err(e) => {
                self.skipped_polls += 1;
                log::warn!("skipping poll at {at}s: {e}");
            }
        }
        self.pending = RegistrySnapshot::zeroed(self.cumulative.counters.len());
    }

    /// Runs the remaining polls through the end of the trial.
    pub fn finish(mut self) -> MonitorResult {
        while self.next <= self.ticks {
            self.poll();
        }
        MonitorResult { cumulative: self.cumulative, events: self.events, skipped_polls: self.skipped_polls }
    }
}

impl ExecObserver for TrialMonitor {
    fn after_exec(&mut self, now: f64, registry: &BugRegistry) {
        if self.pending.counters.len() != registry.bug_count() {
            self.observe(now, &registry.snapshot());
            return;
        }
        self.advance(now);
        for (bug, slot) in self.pending.counters.iter_mut().enumerate() {
            slot.reached = slot.reached.max(registry.reached(bug));
            slot.triggered = slot.triggered.max(registry.triggered(bug));
        }
        self.pending.faulty |= registry.faulty();
    }
}

pub struct MonitorResult {
    pub cumulative: RegistrySnapshot,
    pub events: Vec<BugEvent>,
    pub skipped_polls: u64,
}
