use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::km::{km_estimate, SurvivalCurve};
use super::table::{bug_count_stats, significance_matrix, survival_table, SurvivalTable};
use super::SurvivalError;
use crate::orchestrator::{CampaignRecord, CampaignReport};
use crate::svg::{Frame, Svg, PALETTE};
use crate::targets::BugId;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Survival(#[from] SurvivalError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub records: usize,
    pub invalid_trials: usize,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct TableLine<'a> {
    bug_id: u32,
    bug: String,
    target: &'a str,
    fuzzer: &'a str,
    trials: usize,
    mean_reach_s: f64,
    mean_trigger_s: f64,
    best_reach: u8,
    best_trigger: u8,
}

#[derive(Serialize)]
struct SignifLine<'a> {
    target: &'a str,
    fuzzer_a: &'a str,
    fuzzer_b: &'a str,
    u: f64,
    p_value: f64,
    method: &'static str,
    identical: u8,
    significant: u8,
}

#[derive(Serialize)]
struct CountLine<'a> {
    target: &'a str,
    fuzzer: &'a str,
    trials: usize,
    mean: f64,
    sd: f64,
    counts: String,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), AnalysisError> {
    let err = |source| AnalysisError::Csv { path: path.to_owned(), source };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|source| AnalysisError::Io { path: path.to_owned(), source })
}

/// Writes `survival_table.csv`, `signif_matrix.csv`, `bug_counts.csv` and,
/// with `plots`, one `survival_<bug>.svg` per bug.
pub fn analyze(reports: &[CampaignReport], out: &Path, plots: bool) -> Result<AnalysisSummary, AnalysisError> {
    fs::create_dir_all(out).map_err(|source| AnalysisError::Io { path: out.to_owned(), source })?;
    let records: Vec<CampaignRecord> = reports.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let invalid_trials = reports.iter().map(|r| r.invalid.len()).sum();
    let table = survival_table(&records)?;
    let counts = bug_count_stats(&records)?;
    let signif = significance_matrix(&counts)?;
    let mut files = Vec::new();

    let path = out.join("survival_table.csv");
    write_csv(&path, table_lines(&table))?;
    files.push(path);

    let path = out.join("signif_matrix.csv");
    write_csv(
        &path,
        signif.iter().map(|c| SignifLine {
            target: &c.target,
            fuzzer_a: &c.fuzzer_a,
            fuzzer_b: &c.fuzzer_b,
            u: c.result.u,
            p_value: c.result.p_value,
            method: match c.result.method {
                super::RankMethod::Exact => "exact",
                super::RankMethod::NormalApprox => "normal",
            },
            identical: u8::from(c.result.identical),
            significant: u8::from(c.result.significant()),
        }),
    )?;
    files.push(path);

    let path = out.join("bug_counts.csv");
    write_csv(
        &path,
        counts.iter().map(|s| CountLine {
            target: &s.target,
            fuzzer: &s.fuzzer,
            trials: s.counts.len(),
            mean: s.mean,
            sd: s.sd,
            counts: s.counts.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        }),
    )?;
    files.push(path);

    if plots {
        for row in &table.rows {
            let path = out.join(format!("survival_{}.svg", row.bug));
            let svg = survival_svg(row.bug, &records, table.duration_s)?;
            fs::write(&path, svg).map_err(|source| AnalysisError::Io { path: path.clone(), source })?;
            files.push(path);
        }
    }
    Ok(AnalysisSummary { records: records.len(), invalid_trials, files })
}

fn table_lines(table: &SurvivalTable) -> Vec<TableLine<'_>> {
    let mut lines = Vec::new();
    for row in &table.rows {
        for c in &row.cells {
            lines.push(TableLine {
                bug_id: row.bug.0,
                bug: row.bug.to_string(),
                target: &row.target,
                fuzzer: &c.fuzzer,
                trials: c.trials,
                mean_reach_s: c.mean_reach_s,
                mean_trigger_s: c.mean_trigger_s,
                best_reach: u8::from(c.best_reach),
                best_trigger: u8::from(c.best_trigger),
            });
        }
        lines.push(TableLine {
            bug_id: row.bug.0,
            bug: row.bug.to_string(),
            target: &row.target,
            fuzzer: "mean",
            trials: row.cells.iter().map(|c| c.trials).sum(),
            mean_reach_s: row.mean_reach_s,
            mean_trigger_s: row.mean_trigger_s,
            best_reach: 0,
            best_trigger: 0,
        });
    }
    lines
}

/// Step points of a survival curve from time 0 to `end`.
fn step_points(curve: &SurvivalCurve, values: &[f64], end: f64, start: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, start)];
    let mut level = start;
    for (&t, &v) in curve.times.iter().zip(values) {
        pts.push((t, level));
        pts.push((t, v));
        level = v;
    }
    pts.push((end, level));
    pts
}

/// `(time, observed)` samples for reach and trigger.
type ReachTrigger = (Vec<(f64, bool)>, Vec<(f64, bool)>);

/// Survival plot for one bug: triggered curves solid with a shaded band,
/// reached curves dotted, one color per fuzzer.
pub fn survival_svg(bug: BugId, records: &[CampaignRecord], duration: f64) -> Result<String, SurvivalError> {
    let mut by_fuzzer: BTreeMap<&str, ReachTrigger> = BTreeMap::new();
    for r in records {
        if let Some(t) = r.times(bug) {
            let slot = by_fuzzer.entry(&r.fuzzer).or_default();
            slot.0.push((t.first_reach.time(), t.first_reach.is_observed()));
            slot.1.push((t.first_trigger.time(), t.first_trigger.is_observed()));
        }
    }
    let frame =
        Frame { left: 60.0, top: 30.0, width: 460.0, height: 260.0, x_range: (0.0, duration), y_range: (0.0, 1.0) };
    let mut svg = Svg::new(660, 340);
    svg.text((frame.left + frame.width / 2.0, 18.0), 14, "middle", &format!("Survival of {bug}"));
    for (i, (fuzzer, (reach, trigger))) in by_fuzzer.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let reach = km_estimate(reach)?;
        let trigger = km_estimate(trigger)?;
        let px = |pts: Vec<(f64, f64)>| pts.into_iter().map(|(x, y)| (frame.x(x), frame.y(y))).collect::<Vec<_>>();

        let upper = step_points(&trigger, &trigger.upper, duration, 1.0);
        let mut band = step_points(&trigger, &trigger.lower, duration, 1.0);
        band.reverse();
        let mut outline = upper;
        outline.extend(band);
        svg.polygon(&px(outline), color, 0.15);
        svg.polyline(&px(step_points(&trigger, &trigger.survival, duration, 1.0)), color, false);
        svg.polyline(&px(step_points(&reach, &reach.survival, duration, 1.0)), color, true);

        let ly = frame.top + 14.0 + 16.0 * i as f64;
        let lx = frame.left + frame.width + 12.0;
        svg.line((lx, ly - 4.0), (lx + 16.0, ly - 4.0), color);
        svg.text((lx + 20.0, ly), 11, "start", fuzzer);
    }
    svg.axes(&frame, 5, "time (s)", "survival probability");
    Ok(svg.finish())
}
