use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canary::{BugRegistry, CanaryMode, RegistrySnapshot};
use crate::fuzzer::CoverageMap;

use super::catalog::BugId;

/// How a target execution treats satisfied canaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    /// Record canaries and keep running.
    Normal,
    /// Stop at the first satisfied canary.
    Fatal,
    /// Like `Normal`, but faults an ideal sanitizer would observe abort the
    /// run with a [`ModeledFault`].
    Detect,
}

impl ExecMode {
    pub fn canary_mode(self) -> CanaryMode {
        match self {
            ExecMode::Fatal => CanaryMode::Fatal,
            ExecMode::Normal | ExecMode::Detect => CanaryMode::Normal,
        }
    }
}

impl std::str::FromStr for ExecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(ExecMode::Normal),
            "fatal" => Ok(ExecMode::Fatal),
            "detect" => Ok(ExecMode::Detect),
            other => Err(format!("unknown mode {other:?} (expected normal, fatal or detect)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    DivideByZero,
    OutOfBoundsRead,
    OutOfBoundsWrite,
    UseAfterFree,
    StackExhaustion,
    Hang,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultKind::DivideByZero => "divide-by-zero",
            FaultKind::OutOfBoundsRead => "out-of-bounds read",
            FaultKind::OutOfBoundsWrite => "out-of-bounds write",
            FaultKind::UseAfterFree => "use-after-free",
            FaultKind::StackExhaustion => "stack exhaustion",
            FaultKind::Hang => "hang",
        };
        f.write_str(s)
    }
}

/// A fault the target would exhibit at runtime, raised in place of real
/// memory corruption. `bug` is `None` for faults with no injected bug
/// behind them, such as the execution step limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeledFault {
    pub kind: FaultKind,
    pub bug: Option<BugId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "exit")]
pub enum Exit {
    Clean,
    FatalCanary { bug: BugId },
    ModeledFault { fault: ModeledFault },
}

impl Exit {
    pub fn is_abnormal(&self) -> bool {
        !matches!(self, Exit::Clean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionOutcome {
    pub exit: Exit,
    pub snapshot: RegistrySnapshot,
}

/// Early termination of a target run. Targets propagate it with `?`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abort {
    Fatal(BugId),
    Fault(ModeledFault),
}

impl From<Abort> for Exit {
    fn from(a: Abort) -> Self {
        match a {
            Abort::Fatal(bug) => Exit::FatalCanary { bug },
            Abort::Fault(fault) => Exit::ModeledFault { fault },
        }
    }
}

/// Coarse operation classes counted while a target runs; the input for
/// workload-diversity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpCategory {
    Parse,
    Compare,
    Arith,
    Checksum,
    Copy,
    Alloc,
}

impl OpCategory {
    pub const ALL: [OpCategory; 6] = [
        OpCategory::Parse,
        OpCategory::Compare,
        OpCategory::Arith,
        OpCategory::Checksum,
        OpCategory::Copy,
        OpCategory::Alloc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpCategory::Parse => "parse",
            OpCategory::Compare => "compare",
            OpCategory::Arith => "arith",
            OpCategory::Checksum => "checksum",
            OpCategory::Copy => "copy",
            OpCategory::Alloc => "alloc",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpProfile {
    counts: [u64; 6],
}

impl OpProfile {
    pub fn get(&self, cat: OpCategory) -> u64 {
        self.counts[cat as usize]
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        OpCategory::ALL.iter().map(|&c| (c.as_str().to_owned(), self.get(c) as f64)).collect()
    }
}

/// Default bound on loop iterations per execution before the run is
/// reported as a hang.
pub const DEFAULT_STEP_LIMIT: u64 = 1 << 20;

/// Everything a target can observe or report during one run: the canary
/// registry, optional coverage and comparison feedback for a fuzzer, and
/// an optional operation profile.
pub struct Execution<'a> {
    registry: &'a mut BugRegistry,
    mode: ExecMode,
    coverage: Option<&'a mut CoverageMap>,
    cmplog: bool,
    profile: Option<&'a mut OpProfile>,
    steps: u64,
    step_limit: u64,
}

impl<'a> Execution<'a> {
    /// The registry's canary mode is forced to match `mode`.
    pub fn new(registry: &'a mut BugRegistry, mode: ExecMode) -> Self {
        registry.set_mode(mode.canary_mode());
        Self { registry, mode, coverage: None, cmplog: false, profile: None, steps: 0, step_limit: DEFAULT_STEP_LIMIT }
    }

    pub fn with_coverage(mut self, map: &'a mut CoverageMap) -> Self {
        self.coverage = Some(map);
        self
    }

    /// Turns multi-byte comparisons into incremental coverage feedback.
    pub fn with_cmplog(mut self, enabled: bool) -> Self {
        self.cmplog = enabled;
        self
    }

    pub fn with_profile(mut self, profile: &'a mut OpProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn with_step_limit(mut self, limit: u64) -> Self {
        self.step_limit = limit;
        self
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn registry(&self) -> &BugRegistry {
        self.registry
    }

    /// Canary for `bug` at its reach point; `cond` is the trigger predicate.
    #[inline]
    pub fn canary(&mut self, bug: BugId, cond: bool) -> Result<(), Abort> {
        self.registry.log(bug.index(), cond).map_err(|_| Abort::Fatal(bug))
    }

    /// The faulty operation of `bug`. Only Detect mode observes it.
    #[inline]
    pub fn fault(&mut self, bug: BugId, kind: FaultKind, cond: bool) -> Result<(), Abort> {
        if cond && self.mode == ExecMode::Detect {
            return Err(Abort::Fault(ModeledFault { kind, bug: Some(bug) }));
        }
        Ok(())
    }

    /// Coverage instrumentation point.
    #[inline]
    pub fn edge(&mut self, site: u16) {
        if let Some(map) = self.coverage.as_deref_mut() {
            map.visit(site);
        }
    }

    /// Byte-string equality. With comparison logging on, the length of the
    /// matching prefix is reported as coverage so partial matches count as
    /// progress.
    pub fn cmp_bytes(&mut self, site: u16, lhs: &[u8], rhs: &[u8]) -> bool {
        self.count(OpCategory::Compare, 1);
        if self.cmplog {
            if let Some(map) = self.coverage.as_deref_mut() {
                let prefix = lhs.iter().zip(rhs).take_while(|(a, b)| a == b).count();
                if prefix > 0 {
                    let slot = site as usize ^ (prefix * 0x9E37);
                    map.bump(slot);
                }
            }
        }
        lhs == rhs
    }

    /// One loop iteration; exceeding the step limit aborts as a hang.
    #[inline]
    pub fn tick(&mut self) -> Result<(), Abort> {
        self.steps += 1;
        if self.steps > self.step_limit {
            return Err(Abort::Fault(ModeledFault { kind: FaultKind::Hang, bug: None }));
        }
        Ok(())
    }

    #[inline]
    pub fn count(&mut self, cat: OpCategory, n: u64) {
        if let Some(p) = self.profile.as_deref_mut() {
            p.counts[cat as usize] += n;
        }
    }
}

/// Compile-time instrumentation site id derived from the source location.
#[macro_export]
#[doc(hidden)]
macro_rules! site {
    () => {{
        const ID: u16 = $crate::targets::site_id(concat!(module_path!(), ":", line!(), ":", column!()));
        ID
    }};
}

#[doc(hidden)]
pub const fn site_id(s: &str) -> u16 {
    let bytes = s.as_bytes();
    let mut h: u32 = 0x811C_9DC5;
    let mut i = 0;
    while i < bytes.len() {
        h ^= bytes[i] as u32;
        h = h.wrapping_mul(0x0100_0193);
        i += 1;
    }
    (h ^ (h >> 16)) as u16
}
