use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::mwu::{mwu_test, RankTestResult};
use super::SurvivalError;
use crate::orchestrator::CampaignRecord;
use crate::targets::BugId;

/// Decimal places used when deciding whether two means tie.
pub const DISPLAY_DECIMALS: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub fuzzer: String,
    pub trials: usize,
    pub mean_reach_s: f64,
    pub mean_trigger_s: f64,
    pub best_reach: bool,
    pub best_trigger: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub bug: BugId,
    pub target: String,
    pub cells: Vec<TableCell>,
    /// Means over the fuzzers' means.
    pub mean_reach_s: f64,
    pub mean_trigger_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalTable {
    pub duration_s: f64,
    pub fuzzers: Vec<String>,
    /// Ascending by cross-fuzzer mean trigger time.
    pub rows: Vec<TableRow>,
}

pub(crate) fn common_duration(records: &[CampaignRecord]) -> Result<f64, SurvivalError> {
    let first = records.first().ok_or(SurvivalError::NoRecords)?.duration_s;
    match records.iter().find(|r| r.duration_s != first) {
        Some(r) => Err(SurvivalError::MixedDurations(first, r.duration_s)),
        None => Ok(first),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn rounded(x: f64) -> f64 {
    let scale = 10f64.powi(DISPLAY_DECIMALS);
    (x * scale).round() / scale
}

/// Index of the unique smallest value after display rounding.
fn unique_min(values: &[f64]) -> Option<usize> {
    if values.len() < 2 {
        return None;
    }
    let r: Vec<f64> = values.iter().copied().map(rounded).collect();
    let best = r.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hits = r.iter().enumerate().filter(|(_, &v)| v == best);
    let (idx, _) = hits.next()?;
    hits.next().is_none().then_some(idx)
}

/// Mean time to reach and trigger each bug per fuzzer, with censored
/// trials contributing the full duration.
pub fn survival_table(records: &[CampaignRecord]) -> Result<SurvivalTable, SurvivalError> {
    let duration_s = common_duration(records)?;
    let fuzzers: Vec<String> = records.iter().map(|r| r.fuzzer.clone()).collect::<BTreeSet<_>>().into_iter().collect();

    // (bug, target) -> fuzzer -> (reach times, trigger times)
    type Samples = BTreeMap<String, (Vec<f64>, Vec<f64>)>;
    let mut by_bug: BTreeMap<(BugId, String), Samples> = BTreeMap::new();
    for r in records {
        for b in &r.bugs {
            let slot = by_bug.entry((b.bug, r.target.clone())).or_default().entry(r.fuzzer.clone()).or_default();
            slot.0.push(b.first_reach.time());
            slot.1.push(b.first_trigger.time());
        }
    }

    let mut rows: Vec<TableRow> = by_bug
        .into_iter()
        .map(|((bug, target), samples)| {
            let mut cells: Vec<TableCell> = samples
                .into_iter()
                .map(|(fuzzer, (reach, trigger))| TableCell {
                    fuzzer,
                    trials: reach.len(),
                    mean_reach_s: mean(&reach),
                    mean_trigger_s: mean(&trigger),
                    best_reach: false,
                    best_trigger: false,
                })
                .collect();
            let reach: Vec<f64> = cells.iter().map(|c| c.mean_reach_s).collect();
            let trigger: Vec<f64> = cells.iter().map(|c| c.mean_trigger_s).collect();
            if let Some(i) = unique_min(&reach) {
                cells[i].best_reach = true;
            }
            if let Some(i) = unique_min(&trigger) {
                cells[i].best_trigger = true;
            }
            TableRow { bug, target, mean_reach_s: mean(&reach), mean_trigger_s: mean(&trigger), cells }
        })
        .collect();
    rows.sort_by(|a, b| a.mean_trigger_s.total_cmp(&b.mean_trigger_s).then(a.bug.cmp(&b.bug)));
    Ok(SurvivalTable { duration_s, fuzzers, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BugCountStats {
    pub target: String,
    pub fuzzer: String,
    /// Distinct triggered bugs per valid trial, in trial order.
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub sd: f64,
}

/// Per (target, fuzzer) mean and standard deviation of the number of
/// distinct bugs triggered per trial.
pub fn bug_count_stats(records: &[CampaignRecord]) -> Result<Vec<BugCountStats>, SurvivalError> {
    if records.is_empty() {
        return Err(SurvivalError::NoRecords);
    }
    let mut groups: BTreeMap<(String, String), Vec<(u32, usize)>> = BTreeMap::new();
    for r in records {
        groups.entry((r.target.clone(), r.fuzzer.clone())).or_default().push((r.trial_id, r.triggered_bugs().len()));
    }
    Ok(groups
        .into_iter()
        .map(|((target, fuzzer), mut trials)| {
            trials.sort_unstable();
            let counts: Vec<usize> = trials.into_iter().map(|(_, c)| c).collect();
            let (mean, sd) = mean_sd(&counts);
            BugCountStats { target, fuzzer, counts, mean, sd }
        })
        .collect())
}

pub fn mean_sd(counts: &[usize]) -> (f64, f64) {
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let m = mean(&xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (m, (ss / (xs.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceCell {
    pub target: String,
    pub fuzzer_a: String,
    pub fuzzer_b: String,
    pub result: RankTestResult,
}

/// Rank test on per-trial bug counts for every ordered fuzzer pair of
/// every target.
pub fn significance_matrix(stats: &[BugCountStats]) -> Result<Vec<SignificanceCell>, SurvivalError> {
    let mut out = Vec::new();
    for a in stats {
        for b in stats.iter().filter(|b| b.target == a.target) {
            let xs: Vec<f64> = a.counts.iter().map(|&c| c as f64).collect();
            let ys: Vec<f64> = b.counts.iter().map(|&c| c as f64).collect();
            out.push(SignificanceCell {
                target: a.target.clone(),
                fuzzer_a: a.fuzzer.clone(),
                fuzzer_b: b.fuzzer.clone(),
                result: mwu_test(&xs, &ys)?,
            });
        }
    }
    Ok(out)
}
