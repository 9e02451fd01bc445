use std::env;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use memmap2::MmapMut;
use thiserror::Error;

use super::report::{
    le_u64, report_len, write_header, BugCounters, RegistrySnapshot, HEADER_LEN, OFF_FAULTY, RECORD_LEN,
};

/// Path of the report file shared with the monitor.
pub const ENV_REPORT_PATH: &str = "BENCH_REPORT_PATH";
/// Set to `1` to make the first satisfied canary terminate the target.
pub const ENV_FATAL: &str = "BENCH_FATAL";
/// Process exit status used when a fatal canary fires.
pub const FATAL_EXIT_CODE: i32 = 77;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanaryMode {
    Normal,
    Fatal,
}

impl CanaryMode {
    /// `Fatal` iff `BENCH_FATAL=1`.
    pub fn from_env() -> Self {
        match env::var(ENV_FATAL) {
            Ok(v) if v == "1" => CanaryMode::Fatal,
            _ => CanaryMode::Normal,
        }
    }
}

#[derive(Debug, Error)]
pub enum CanaryError {
    #[error("bug_count must be at least 1")]
    NoBugs,
    #[error("bug_count {0} does not fit the report header")]
    TooManyBugs(usize),
    #[error("cannot initialize report file {path}: {source}")]
    Init {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A fatal canary fired for `bug`. The registry has already recorded the
/// trigger; the caller is expected to stop the execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FatalCanary {
    pub bug: usize,
}

enum Region {
    Heap(Vec<u8>),
    Mapped(MmapMut),
}

impl Region {
    #[inline]
    fn bytes(&self) -> &[u8] {
        match self {
            Region::Heap(v) => v,
            Region::Mapped(m) => m,
        }
    }

    #[inline]
    fn bytes_mut(&mut self) -> &mut [u8] {
        match self {
            Region::Heap(v) => v,
            Region::Mapped(m) => m,
        }
    }
}

/// Canary state for one target execution, stored directly in the report
/// layout so a mapped file is always a valid report.
pub struct BugRegistry {
    region: Region,
    bug_count: usize,
    mode: CanaryMode,
}

impl std::fmt::Debug for BugRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BugRegistry")
            .field("bug_count", &self.bug_count)
            .field("mode", &self.mode)
            .field("faulty", &self.faulty())
            .field("mapped", &matches!(self.region, Region::Mapped(_)))
            .finish()
    }
}

impl BugRegistry {
    /// A registry backed by process memory only.
    pub fn in_memory(bug_count: usize, mode: CanaryMode) -> Result<Self, CanaryError> {
        check_count(bug_count)?;
        let mut bytes = vec![0u8; report_len(bug_count)];
        write_header(&mut bytes, bug_count as u32);
        Ok(Self { region: Region::Heap(bytes), bug_count, mode })
    }

    /// Creates (or truncates) `path`, sizes it for `bug_count` records and
    /// maps it shared so a monitor in another process can read it.
    pub fn create(bug_count: usize, mode: CanaryMode, path: &Path) -> Result<Self, CanaryError> {
        check_count(bug_count)?;
        let init = |source| CanaryError::Init { path: path.to_owned(), source };
        let file = OpenOptions::new().read(true).write(true).create(true).truncate(true).open(path).map_err(init)?;
        file.set_len(report_len(bug_count) as u64).map_err(init)?;
        // SAFETY: the file was just created with the exact size; other
        // processes only ever read it.
        let mut map = unsafe { MmapMut::map_mut(&file) }.map_err(init)?;
        map.fill(0);
        write_header(&mut map, bug_count as u32);
        Ok(Self { region: Region::Mapped(map), bug_count, mode })
    }

    /// Registry configured from `BENCH_REPORT_PATH` and `BENCH_FATAL`. Falls
    /// back to an in-memory region when no path is set.
    pub fn from_env(bug_count: usize) -> Result<Self, CanaryError> {
        let mode = CanaryMode::from_env();
        match env::var_os(ENV_REPORT_PATH) {
            Some(path) if !path.is_empty() => Self::create(bug_count, mode, Path::new(&path)),
            _ => Self::in_memory(bug_count, mode),
        }
    }

    pub fn bug_count(&self) -> usize {
        self.bug_count
    }

    pub fn mode(&self) -> CanaryMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: CanaryMode) {
        self.mode = mode;
    }

    pub fn faulty(&self) -> bool {
        self.region.bytes()[OFF_FAULTY] != 0
    }

    pub fn reached(&self, bug: usize) -> u64 {
        le_u64(self.region.bytes(), record_off(bug))
    }

    pub fn triggered(&self, bug: usize) -> u64 {
        le_u64(self.region.bytes(), record_off(bug) + 8)
    }

    pub fn counters(&self, bug: usize) -> BugCounters {
        BugCounters { reached: self.reached(bug), triggered: self.triggered(bug) }
    }

    /// Records one visit of `bug`'s canary.
    ///
    /// The update is branch-free: both counters are always written, and the
    /// increment is masked by `faulty ^ 1` so the state freezes once any
    /// condition has held. In fatal mode a satisfied condition on a live
    /// registry is reported back as [`FatalCanary`] after the counters are
    /// updated. An out-of-range id is logged and ignored.
    #[inline]
    pub fn log(&mut self, bug: usize, condition: bool) -> Result<(), FatalCanary> {
        if bug >= self.bug_count {
            log::error!("canary id {bug} out of range (bug_count = {})", self.bug_count);
            return Ok(());
        }
        let bytes = self.region.bytes_mut();
        let live = (bytes[OFF_FAULTY] ^ 1) as u64;
        let cond = condition as u64;
        let off = record_off(bug);
        let reached = le_u64(bytes, off).wrapping_add(1 & live);
        let triggered = le_u64(bytes, off + 8).wrapping_add(cond & live);
        bytes[off..off + 8].copy_from_slice(&reached.to_le_bytes());
        bytes[off + 8..off + 16].copy_from_slice(&triggered.to_le_bytes());
        bytes[OFF_FAULTY] |= cond as u8;

        if self.mode == CanaryMode::Fatal && (cond & live) == 1 {
            return Err(FatalCanary { bug });
        }
        Ok(())
    }

    /// Clears all counters and the faulty flag for the next execution.
    pub fn reset(&mut self) {
        self.region.bytes_mut()[OFF_FAULTY..].fill(0);
    }

    pub fn snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot {
            timestamp: 0.0,
            faulty: self.faulty(),
            counters: (0..self.bug_count).map(|b| self.counters(b)).collect(),
        }
    }

    /// The raw report bytes.
    pub fn as_bytes(&self) -> &[u8] {
        self.region.bytes()
    }

    /// Flushes a mapped region to its file; a no-op for in-memory registries.
    pub fn flush(&self) -> std::io::Result<()> {
        match &self.region {
            Region::Heap(_) => Ok(()),
            Region::Mapped(m) => m.flush(),
        }
    }

    /// Persists the counters and exits with [`FATAL_EXIT_CODE`].
    pub fn terminate_fatal(&self, bug: usize) -> ! {
        if let Err(e) = self.flush() {
            log::error!("flushing canary report before fatal exit: {e}");
        }
        log::warn!("fatal canary: bug {bug} triggered");
        std::process::exit(FATAL_EXIT_CODE)
    }
}

#[inline]
fn record_off(bug: usize) -> usize {
    HEADER_LEN + RECORD_LEN * bug
}

fn check_count(bug_count: usize) -> Result<(), CanaryError> {
    if bug_count == 0 {
        return Err(CanaryError::NoBugs);
    }
    if bug_count > u32::MAX as usize {
        return Err(CanaryError::TooManyBugs(bug_count));
    }
    Ok(())
}
