//! On-disk layout of the canary report region.
//!
//! All integers are little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GTBM"
//!      4     2  version (1)
//!      6     2  reserved (0)
//!      8     4  bug_count
//!     12     1  faulty (0 or 1)
//!     13     7  zero padding
//!     20  16*n  { u64 reached, u64 triggered } per bug
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_MAGIC: [u8; 4] = *b"GTBM";
pub const REPORT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;
pub const RECORD_LEN: usize = 16;

pub(crate) const OFF_VERSION: usize = 4;
pub(crate) const OFF_RESERVED: usize = 6;
pub(crate) const OFF_BUG_COUNT: usize = 8;
pub(crate) const OFF_FAULTY: usize = 12;

/// Size in bytes of a report holding `bug_count` records.
pub const fn report_len(bug_count: usize) -> usize {
    HEADER_LEN + RECORD_LEN * bug_count
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("report truncated: {len} bytes, need at least {needed}")]
    Truncated { len: usize, needed: usize },
    #[error("bad report magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported report version {0}")]
    BadVersion(u16),
    #[error("malformed report header: {0}")]
    Malformed(&'static str),
    #[error("report has {extra} trailing bytes")]
    Trailing { extra: usize },
    #[error("reading report: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugCounters {
    pub reached: u64,
    pub triggered: u64,
}

/// Decoded view of a report region at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrySnapshot {
    /// Seconds since trial start when the snapshot was taken. Not part of
    /// the on-disk layout; decoding leaves it at zero.
    pub timestamp: f64,
    pub faulty: bool,
    pub counters: Vec<BugCounters>,
}

impl RegistrySnapshot {
    pub fn zeroed(bug_count: usize) -> Self {
        Self { timestamp: 0.0, faulty: false, counters: vec![BugCounters::default(); bug_count] }
    }

    pub fn bug_count(&self) -> usize {
        self.counters.len()
    }

    pub fn reached(&self, bug: usize) -> u64 {
        self.counters[bug].reached
    }

    pub fn triggered(&self, bug: usize) -> u64 {
        self.counters[bug].triggered
    }

    /// Lowest-numbered bug with a nonzero trigger count. Because counters
    /// freeze at the first trigger, at most one bug can qualify within a
    /// single execution.
    pub fn first_triggered(&self) -> Option<usize> {
        self.counters.iter().position(|c| c.triggered > 0)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![0u8; report_len(self.counters.len())];
        write_header(&mut out, self.counters.len() as u32);
        out[OFF_FAULTY] = self.faulty as u8;
        for (i, c) in self.counters.iter().enumerate() {
            let off = HEADER_LEN + RECORD_LEN * i;
            out[off..off + 8].copy_from_slice(&c.reached.to_le_bytes());
            out[off + 8..off + 16].copy_from_slice(&c.triggered.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ReportError> {
        let bug_count = validate_header(bytes)?;
        let counters = (0..bug_count)
            .map(|i| {
                let off = HEADER_LEN + RECORD_LEN * i;
                BugCounters { reached: le_u64(bytes, off), triggered: le_u64(bytes, off + 8) }
            })
            .collect();
        Ok(Self { timestamp: 0.0, faulty: bytes[OFF_FAULTY] == 1, counters })
    }
}

/// Reads and decodes a report file produced by another process.
///
/// The writer updates counters in place, so the file is read twice and the
/// read is retried until two consecutive reads agree.
pub fn read_report(path: &Path) -> Result<RegistrySnapshot, ReportError> {
    let read = || fs::read(path).map_err(|e| ReportError::Io(e.to_string()));
    let mut prev = read()?;
    for _ in 0..8 {
        let next = read()?;
        if next == prev {
            break;
        }
        prev = next;
    }
    RegistrySnapshot::decode(&prev)
}

pub(crate) fn write_header(out: &mut [u8], bug_count: u32) {
    out[..4].copy_from_slice(&REPORT_MAGIC);
    out[OFF_VERSION..OFF_VERSION + 2].copy_from_slice(&REPORT_VERSION.to_le_bytes());
    out[OFF_RESERVED..OFF_RESERVED + 2].copy_from_slice(&0u16.to_le_bytes());
    out[OFF_BUG_COUNT..OFF_BUG_COUNT + 4].copy_from_slice(&bug_count.to_le_bytes());
    out[OFF_FAULTY..HEADER_LEN].fill(0);
}

fn validate_header(bytes: &[u8]) -> Result<usize, ReportError> {
    if bytes.len() < HEADER_LEN {
        return Err(ReportError::Truncated { len: bytes.len(), needed: HEADER_LEN });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != REPORT_MAGIC {
        return Err(ReportError::BadMagic(magic));
    }
    let version = u16::from_le_bytes([bytes[OFF_VERSION], bytes[OFF_VERSION + 1]]);
    if version != REPORT_VERSION {
        return Err(ReportError::BadVersion(version));
    }
    if bytes[OFF_RESERVED..OFF_RESERVED + 2] != [0, 0] {
        return Err(ReportError::Malformed("reserved field is nonzero"));
    }
    if bytes[OFF_FAULTY] > 1 {
        return Err(ReportError::Malformed("faulty flag is not 0 or 1"));
    }
    if bytes[OFF_FAULTY + 1..HEADER_LEN].iter().any(|&b| b != 0) {
        return Err(ReportError::Malformed("header padding is nonzero"));
    }
    let bug_count = u32::from_le_bytes(bytes[OFF_BUG_COUNT..OFF_BUG_COUNT + 4].try_into().unwrap()) as usize;
    let needed = report_len(bug_count);
    if bytes.len() < needed {
        return Err(ReportError::Truncated { len: bytes.len(), needed });
    }
    if bytes.len() > needed {
        return Err(ReportError::Trailing { extra: bytes.len() - needed });
    }
    Ok(bug_count)
}

#[inline]
pub(crate) fn le_u64(bytes: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
}
