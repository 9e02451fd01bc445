//! Repeated fuzzing trials with periodic canary polling and crash triage.

mod config;
mod monitor;
mod record;
mod run;
mod triage;

pub use config::{CampaignConfig, ConfigError};
pub use monitor::{poll_merge, BugEvent, EventKind, MonitorResult, PollError, TrialMonitor};
pub use record::{
    load_reports, BugTimes, CampaignRecord, CampaignReport, CrashSummary, InvalidTrial, Observation, RecordError,
    CAMPAIGN_FILE, EVENTS_FILE, TRIAGE_FILE,
};
pub use run::{run_trials, run_trials_on};
pub use triage::{replay_triage, TriageError, TriageReport, UnknownCrash};
