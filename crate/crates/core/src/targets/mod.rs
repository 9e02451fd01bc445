//! Synthetic instrumented targets with injected, canary-annotated bugs.
//!
//! Faults are modeled rather than real: a triggered bug shows up as its
//! canary condition, and in [`ExecMode::Detect`] as a [`ModeledFault`] for
//! the bugs an ideal sanitizer would catch.

mod catalog;
pub mod chunk;
mod exec;
pub mod kv;

pub use catalog::{
    bug_density, bugs_for, catalog, descriptor, descriptor_by_name, list_bugs, BugClass, BugDescriptor, BugId,
    BugListing, CHUNK_PARSER, KV_PARSER, SUITE_BUG_COUNT, TARGET_NAMES,
};
pub use exec::{
    site_id, Abort, ExecMode, Execution, ExecutionOutcome, Exit, FaultKind, ModeledFault, OpCategory, OpProfile,
    DEFAULT_STEP_LIMIT,
};

use thiserror::Error;

use crate::canary::{BugRegistry, CanaryError};

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error("unknown bug {0}")]
    UnknownBug(String),
    #[error("no proof-of-vulnerability input is available for {0}")]
    PovNotAvailable(BugId),
    #[error(transparent)]
    Canary(#[from] CanaryError),
}

/// An instrumented program under test.
pub trait Target: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of canary slots the target's registry needs.
    fn registry_size(&self) -> usize {
        SUITE_BUG_COUNT
    }

    /// Parses `input`, calling [`Execution::canary`] at every injected
    /// bug's reach point.
    fn run(&self, input: &[u8], exec: &mut Execution<'_>) -> Result<(), Abort>;
}

static CHUNK: chunk::ChunkParser = chunk::ChunkParser;
static KV: kv::KvParser = kv::KvParser;

pub fn target(name: &str) -> Result<&'static dyn Target, TargetError> {
    match name {
        CHUNK_PARSER => Ok(&CHUNK),
        KV_PARSER => Ok(&KV),
        other => Err(TargetError::UnknownTarget(other.to_owned())),
    }
}

/// Built-in seed corpus for a target.
pub fn seeds(name: &str) -> Result<Vec<Vec<u8>>, TargetError> {
    match name {
        CHUNK_PARSER => Ok(chunk::seeds()),
        KV_PARSER => Ok(kv::seeds()),
        other => Err(TargetError::UnknownTarget(other.to_owned())),
    }
}

/// Stored proof-of-vulnerability input for `bug`.
pub fn pov(bug: BugId) -> Result<Vec<u8>, TargetError> {
    let desc = descriptor(bug).ok_or_else(|| TargetError::UnknownBug(bug.0.to_string()))?;
    let input = match desc.target {
        CHUNK_PARSER => chunk::pov(bug),
        KV_PARSER => kv::pov(bug),
        _ => None,
    };
    match input {
        Some(bytes) if desc.has_pov => Ok(bytes),
        _ => Err(TargetError::PovNotAvailable(bug)),
    }
}

/// Runs `input` through `target` against an existing registry, which is
/// reset first.
pub fn execute(target: &dyn Target, input: &[u8], mode: ExecMode, registry: &mut BugRegistry) -> ExecutionOutcome {
    registry.reset();
    let mut exec = Execution::new(registry, mode);
    let exit = match target.run(input, &mut exec) {
        Ok(()) => Exit::Clean,
        Err(abort) => abort.into(),
    };
    ExecutionOutcome { exit, snapshot: registry.snapshot() }
}

/// Runs one input through a named target with a fresh in-memory registry.
pub fn run_driver(name: &str, input: &[u8], mode: ExecMode) -> Result<ExecutionOutcome, TargetError> {
    let t = target(name)?;
    let mut registry = BugRegistry::in_memory(t.registry_size(), mode.canary_mode())?;
    Ok(execute(t, input, mode, &mut registry))
}

/// Operation-category counts for one run of `input`.
pub fn profile(name: &str, input: &[u8]) -> Result<OpProfile, TargetError> {
    let t = target(name)?;
    let mut registry = BugRegistry::in_memory(t.registry_size(), ExecMode::Normal.canary_mode())?;
    let mut profile = OpProfile::default();
    let mut exec = Execution::new(&mut registry, ExecMode::Normal).with_profile(&mut profile);
    let _ = t.run(input, &mut exec);
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_target_is_an_argument_error() {
        assert!(matches!(run_driver("no-such-target", b"", ExecMode::Normal), Err(TargetError::UnknownTarget(_))));
    }

    #[test]
    fn missing_pov_is_reported() {
        let no_pov = catalog().iter().find(|d| !d.has_pov).unwrap();
        assert!(matches!(pov(no_pov.id), Err(TargetError::PovNotAvailable(_))));
        assert!(matches!(pov(BugId(9999)), Err(TargetError::UnknownBug(_))));
    }

    #[test]
    fn seeds_are_clean_in_every_mode() {
        for name in TARGET_NAMES {
            for seed in seeds(name).unwrap() {
                for mode in [ExecMode::Normal, ExecMode::Fatal, ExecMode::Detect] {
                    let out = run_driver(name, &seed, mode).unwrap();
                    assert_eq!(out.exit, Exit::Clean, "{name} {mode:?}");
                    assert!(!out.snapshot.faulty);
                }
            }
        }
    }

    #[test]
    fn profiles_count_operations() {
        let p = profile(CHUNK_PARSER, &chunk::valid_file()).unwrap();
        assert!(p.get(OpCategory::Checksum) > 0);
        assert!(p.get(OpCategory::Parse) > 0);
        let empty = profile(CHUNK_PARSER, b"").unwrap();
        assert_eq!(empty.get(OpCategory::Checksum), 0);
    }
}
