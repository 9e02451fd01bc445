//! Coverage-guided greybox fuzzer in the style of AFL.

mod campaign;
mod coverage;
mod mutate;

pub use campaign::{
    fuzz_campaign, Budget, CampaignError, CampaignResult, CampaignStats, Clock, Crash, ExecObserver, Fuzzer,
    FuzzerConfig, QueueEntry,
};
pub use coverage::{bucket_class, coverage_index, is_interesting, CoverageMap, GlobalCoverage, MAP_SIZE};
pub use mutate::{
    deterministic_stages, interesting_values, mutate, Endian, InterestingValue, MutateError, Stage, Width, ARITH_MAX,
    MAX_INPUT_LEN,
};
