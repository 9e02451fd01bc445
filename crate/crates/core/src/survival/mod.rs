//! Survival analysis of campaign records: Kaplan-Meier curves, mean
//! survival tables, rank tests and bug-count statistics.

mod km;
mod mwu;
mod output;
mod table;

use thiserror::Error;

pub use km::{km_estimate, SurvivalCurve, Z_95};
pub use mwu::{
    exact_p_value, mwu_test, normal_p_value, u_distribution, u_statistic, RankMethod, RankTestResult, ALPHA,
    EXACT_MAX_N,
};
pub use output::{analyze, survival_svg, AnalysisError, AnalysisSummary};
pub use table::{
    bug_count_stats, mean_sd, significance_matrix, survival_table, BugCountStats, SignificanceCell, SurvivalTable,
    TableCell, TableRow, DISPLAY_DECIMALS,
};

#[derive(Debug, Error, PartialEq)]
pub enum SurvivalError {
    #[error("at least one observation is required")]
    Empty,
    #[error("invalid observation {0}")]
    InvalidTime(f64),
    #[error("no valid trial records")]
    NoRecords,
    #[error("records mix trial durations {0}s and {1}s")]
    MixedDurations(f64, f64),
}
