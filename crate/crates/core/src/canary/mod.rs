//! Bug canaries: the per-execution oracle state shared between an
//! instrumented target and the monitor.
//!
//! Every injected bug owns a pair of counters. `reached` counts how often
//! control arrived at the bug site, `triggered` how often its fault
//! condition held there. The first satisfied condition sets the `faulty`
//! flag, after which no counter moves for the rest of the execution: data
//! gathered once the program is in a weird state is not trustworthy.

mod combinators;
mod registry;
mod report;

pub use combinators::{and_nb, not_nb, or_nb};
pub use registry::{BugRegistry, CanaryError, CanaryMode, FatalCanary, ENV_FATAL, ENV_REPORT_PATH, FATAL_EXIT_CODE};
pub use report::{
    read_report, report_len, BugCounters, RegistrySnapshot, ReportError, HEADER_LEN, RECORD_LEN, REPORT_MAGIC,
    REPORT_VERSION,
};
