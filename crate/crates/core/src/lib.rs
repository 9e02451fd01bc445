//! Ground-truth fuzzing benchmark: canary runtime, synthetic targets, a
//! baseline greybox fuzzer, campaign orchestration and the statistics used
//! to evaluate campaigns.

pub mod canary;
pub mod diversity;
pub mod fuzzer;
pub mod orchestrator;
pub mod survival;
pub mod svg;
pub mod targets;

pub use canary::{BugRegistry, CanaryMode, RegistrySnapshot};
pub use diversity::{FeatureMatrix, PcaResult, Profile};
pub use fuzzer::{CoverageMap, QueueEntry};
pub use orchestrator::{BugEvent, CampaignConfig, CampaignRecord, CampaignReport, Observation};
pub use survival::{RankTestResult, SurvivalCurve};
pub use targets::{BugDescriptor, BugId, ExecMode, ExecutionOutcome, Exit, ModeledFault, Target};
