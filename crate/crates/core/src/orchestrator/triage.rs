use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canary::{BugRegistry, CanaryError};
use crate::targets::{execute, BugId, ExecMode, Exit, Target};

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("replay executor setup failed: {0}")]
    Executor(#[from] CanaryError),
}

/// A saved crash whose replay triggered no injected bug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownCrash {
    pub crash_id: usize,
    pub exit: Exit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub replayed: usize,
    pub detected: BTreeSet<BugId>,
    /// Bugs some crash triggered without a modeled fault being observed.
    pub triggered_undetected: BTreeSet<BugId>,
    pub unknown_crashes: Vec<UnknownCrash>,
}

/// Replays crashing inputs in detect mode. A bug is detected when a replay
/// triggers its canary and ends in a modeled fault attributed to it.
pub fn replay_triage(target: &dyn Target, crashes: &[Vec<u8>]) -> Result<TriageReport, TriageError> {
    let mut registry = BugRegistry::in_memory(target.registry_size(), ExecMode::Detect.canary_mode())?;
    let mut report = TriageReport { replayed: crashes.len(), ..TriageReport::default() };
    let mut triggered = BTreeSet::new();
    for (crash_id, input) in crashes.iter().enumerate() {
        let outcome = execute(target, input, ExecMode::Detect, &mut registry);
        let hit: Vec<BugId> = (0..outcome.snapshot.bug_count())
            .filter(|&b| outcome.snapshot.triggered(b) > 0)
            .map(|b| BugId(b as u32))
            .collect();
        if hit.is_empty() {
            report.unknown_crashes.push(UnknownCrash { crash_id, exit: outcome.exit });
            continue;
        }
        if let Exit::ModeledFault { fault } = outcome.exit {
            if let Some(bug) = fault.bug.filter(|b| hit.contains(b)) {
                report.detected.insert(bug);
            }
        }
        triggered.extend(hit);
    }
    report.triggered_undetected = triggered.difference(&report.detected).copied().collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{chunk, pov, target, CHUNK_PARSER};

    #[test]
    fn empty_crash_set_detects_nothing() {
        let r = replay_triage(target(CHUNK_PARSER).unwrap(), &[]).unwrap();
        assert!(r.detected.is_empty() && r.triggered_undetected.is_empty());
    }

    #[test]
    fn div_zero_pov_is_detected() {
        let r = replay_triage(target(CHUNK_PARSER).unwrap(), &[pov(chunk::ZERO_HEIGHT).unwrap()]).unwrap();
        assert_eq!(r.detected, BTreeSet::from([chunk::ZERO_HEIGHT]));
        assert!(r.triggered_undetected.is_empty());
    }

    #[test]
    fn semantic_bug_is_triggered_but_undetected() {
        let r = replay_triage(target(CHUNK_PARSER).unwrap(), &[pov(chunk::PALETTE_MISMATCH).unwrap()]).unwrap();
        assert!(r.detected.is_empty());
        assert_eq!(r.triggered_undetected, BTreeSet::from([chunk::PALETTE_MISMATCH]));
    }

    #[test]
    fn non_reproducing_input_is_unknown() {
        let r = replay_triage(target(CHUNK_PARSER).unwrap(), &[chunk::valid_file()]).unwrap();
        assert_eq!(r.unknown_crashes.len(), 1);
    }
}
