use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::CampaignConfig;
use super::monitor::{BugEvent, EventKind};
use super::triage::TriageReport;
use crate::fuzzer::{CampaignStats, Crash};
use crate::targets::{BugId, Exit};

pub const EVENTS_FILE: &str = "events.csv";
pub const CAMPAIGN_FILE: &str = "campaign.json";
pub const TRIAGE_FILE: &str = "triage.json";

/// Time of a first event, or the trial duration if it never happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "time_s", rename_all = "snake_case")]
pub enum Observation {
    Observed(f64),
    Censored(f64),
}

impl Observation {
    pub fn time(self) -> f64 {
        match self {
            Observation::Observed(t) | Observation::Censored(t) => t,
        }
    }

    pub fn is_observed(self) -> bool {
        matches!(self, Observation::Observed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BugTimes {
    pub bug: BugId,
    pub first_reach: Observation,
    pub first_trigger: Observation,
}

impl BugTimes {
    /// First reach and trigger of `bug` among `events`, censored at
    /// `duration` when absent.
    pub fn from_events(bug: BugId, events: &[BugEvent], duration: f64) -> Self {
        let first = |kind| {
            events
                .iter()
                .filter(|e| e.bug == bug && e.kind == kind)
                .map(|e| e.time_s)
                .min_by(f64::total_cmp)
                .map_or(Observation::Censored(duration), Observation::Observed)
        };
        Self { bug, first_reach: first(EventKind::Reach), first_trigger: first(EventKind::Trigger) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashSummary {
    pub id: usize,
    pub file: String,
    pub exit: Exit,
    pub discovered_at: f64,
    #[serde(skip)]
    pub input: Vec<u8>,
}

impl From<&Crash> for CrashSummary {
    fn from(c: &Crash) -> Self {
        Self { id: c.id, file: c.file_name(), exit: c.exit, discovered_at: c.discovered_at, input: c.input.clone() }
    }
}

/// Outcome of one valid trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub trial_id: u32,
    pub fuzzer: String,
    pub target: String,
    pub rng_seed: u64,
    pub duration_s: f64,
    pub poll_interval_s: f64,
    /// One entry per bug of the target, in id order.
    pub bugs: Vec<BugTimes>,
    pub crashes: Vec<CrashSummary>,
    pub triage: TriageReport,
    pub stats: CampaignStats,
}

impl CampaignRecord {
    pub fn triggered_bugs(&self) -> BTreeSet<BugId> {
        self.bugs.iter().filter(|b| b.first_trigger.is_observed()).map(|b| b.bug).collect()
    }

    pub fn times(&self, bug: BugId) -> Option<&BugTimes> {
        self.bugs.iter().find(|b| b.bug == bug)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidTrial {
    pub trial_id: u32,
    pub rng_seed: u64,
    pub reason: String,
}

/// All trials of one campaign. Invalid trials are kept for the record but
/// excluded from `records`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub trials_requested: u32,
    pub trials_valid: u32,
    pub invalid: Vec<InvalidTrial>,
    pub records: Vec<CampaignRecord>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed campaign file {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("no {CAMPAIGN_FILE} found under {0}")]
    NotFound(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RecordError + '_ {
    move |source| RecordError::Io { path: path.to_owned(), source }
}

#[derive(Serialize)]
struct EventRow {
    trial_id: u32,
    bug_id: u32,
    event: &'static str,
    time_s: f64,
    censored: u8,
}

#[derive(Serialize)]
struct TriageEntry<'a> {
    trial_id: u32,
    detected: Vec<String>,
    triggered_undetected: Vec<String>,
    unknown_crashes: Vec<&'a str>,
}

#[derive(Serialize)]
struct TriageFile<'a> {
    trials: Vec<TriageEntry<'a>>,
    invalid: &'a [InvalidTrial],
}

impl CampaignReport {
    /// Writes `events.csv`, `campaign.json`, `triage.json` and each trial's
    /// crash inputs under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), RecordError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let events_path = dir.join(EVENTS_FILE);
        let csv_err = |source| RecordError::Csv { path: events_path.clone(), source };
        let mut w = csv::Writer::from_path(&events_path).map_err(csv_err)?;
        for r in &self.records {
            for b in &r.bugs {
                for (kind, obs) in [(EventKind::Reach, b.first_reach), (EventKind::Trigger, b.first_trigger)] {
                    w.serialize(EventRow {
                        trial_id: r.trial_id,
                        bug_id: b.bug.0,
                        event: kind.code(),
                        time_s: obs.time(),
                        censored: u8::from(!obs.is_observed()),
                    })
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush().map_err(io_err(&events_path))?;

        let campaign_path = dir.join(CAMPAIGN_FILE);
        let json = serde_json::to_vec_pretty(self)
            .map_err(|source| RecordError::Json { path: campaign_path.clone(), source })?;
        fs::write(&campaign_path, json).map_err(io_err(&campaign_path))?;

        let names = |set: &BTreeSet<BugId>| set.iter().map(|b| b.to_string()).collect();
        let triage = TriageFile {
            trials: self
                .records
                .iter()
                .map(|r| TriageEntry {
                    trial_id: r.trial_id,
                    detected: names(&r.triage.detected),
                    triggered_undetected: names(&r.triage.triggered_undetected),
                    unknown_crashes: r
                        .triage
                        .unknown_crashes
                        .iter()
                        .filter_map(|u| r.crashes.get(u.crash_id).map(|c| c.file.as_str()))
                        .collect(),
                })
                .collect(),
            invalid: &self.invalid,
        };
        let triage_path = dir.join(TRIAGE_FILE);
        let json = serde_json::to_vec_pretty(&triage)
            .map_err(|source| RecordError::Json { path: triage_path.clone(), source })?;
        fs::write(&triage_path, json).map_err(io_err(&triage_path))?;

        for r in &self.records {
            let crash_dir = dir.join(format!("trial_{:03}", r.trial_id)).join("crashes");
            fs::create_dir_all(&crash_dir).map_err(io_err(&crash_dir))?;
            for c in &r.crashes {
                let path = crash_dir.join(&c.file);
                fs::write(&path, &c.input).map_err(io_err(&path))?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RecordError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        serde_json::from_slice(&bytes).map_err(|source| RecordError::Json { path: path.to_owned(), source })
    }
}

/// Loads every campaign report under `root`, which may also name a single
/// report file. Reports are returned in path order.
pub fn load_reports(root: &Path) -> Result<Vec<CampaignReport>, RecordError> {
    if root.is_file() {
        return Ok(vec![CampaignReport::load(root)?]);
    }
    let mut found = Vec::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == CAMPAIGN_FILE) {
                found.push(path);
            }
        }
    }
    if found.is_empty() {
        return Err(RecordError::NotFound(root.to_owned()));
    }
    found.sort();
    found.iter().map(|p| CampaignReport::load(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bug_times_censor_missing_events() {
        let events = [
            BugEvent { bug: BugId(1), kind: EventKind::Reach, time_s: 5.0 },
            BugEvent { bug: BugId(1), kind: EventKind::Trigger, time_s: 10.0 },
        ];
        let t = BugTimes::from_events(BugId(1), &events, 60.0);
        assert_eq!(t.first_reach, Observation::Observed(5.0));
        assert_eq!(t.first_trigger, Observation::Observed(10.0));
        let t = BugTimes::from_events(BugId(2), &events, 60.0);
        assert_eq!(t.first_trigger, Observation::Censored(60.0));
    }
}
