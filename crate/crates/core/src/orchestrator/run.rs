use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::thread;

use super::config::{CampaignConfig, ConfigError};
use super::monitor::TrialMonitor;
use super::record::{BugTimes, CampaignRecord, CampaignReport, CrashSummary, InvalidTrial};
use super::triage::replay_triage;
use crate::fuzzer::{Budget, Clock, Fuzzer};
use crate::targets::{self, bugs_for, Target};

/// Runs every trial of `config` against its named target and seed source.
pub fn run_trials(config: &CampaignConfig) -> Result<CampaignReport, ConfigError> {
    config.validate()?;
    let target = targets::target(&config.target)?;
    let seeds = config.load_seeds()?;
    Ok(run_trials_on(config, target, &seeds))
}

/// Runs every trial of `config` against an explicit target and seed set.
/// Trial `i` uses rng seed `config.rng_seed + i`; up to `config.workers`
/// trials run concurrently.
pub fn run_trials_on(config: &CampaignConfig, target: &dyn Target, seeds: &[Vec<u8>]) -> CampaignReport {
    let next = AtomicU32::new(0);
    let results = Mutex::new(Vec::with_capacity(config.trials as usize));
    let workers = config.workers.min(config.trials as usize).max(1);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let trial_id = next.fetch_add(1, Ordering::Relaxed);
                if trial_id >= config.trials {
                    break;
                }
                let outcome = panic::catch_unwind(AssertUnwindSafe(|| run_one(config, target, seeds, trial_id)))
                    .unwrap_or_else(|payload| Err(panic_message(payload.as_ref())));
                results.lock().unwrap_or_else(|e| e.into_inner()).push((trial_id, outcome));
            });
        }
    });
    let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    results.sort_by_key(|(id, _)| *id);

    let mut records = Vec::new();
    let mut invalid = Vec::new();
    for (trial_id, outcome) in results {
        match outcome {
            Ok(record) => records.push(record),
            Err(reason) => {
                log::error!("trial {trial_id} invalid: {reason}");
                invalid.push(InvalidTrial { trial_id, rng_seed: trial_seed(config, trial_id), reason });
            }
        }
    }
    CampaignReport {
        config: config.clone(),
        trials_requested: config.trials,
        trials_valid: records.len() as u32,
        invalid,
        records,
    }
}

fn trial_seed(config: &CampaignConfig, trial_id: u32) -> u64 {
    config.rng_seed.wrapping_add(u64::from(trial_id))
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    let msg = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic payload".to_owned());
    format!("trial panicked: {msg}")
}

fn run_one(
    config: &CampaignConfig,
    target: &dyn Target,
    seeds: &[Vec<u8>],
    trial_id: u32,
) -> Result<CampaignRecord, String> {
    let rng_seed = trial_seed(config, trial_id);
    let clock = match config.execs_per_sec {
        Some(execs_per_sec) => Clock::Virtual { execs_per_sec },
        None => Clock::Wall,
    };
    let fuzzer =
        Fuzzer::new(target, seeds, Budget::Seconds(config.duration_s), rng_seed, config.fuzzer_config(), clock)
            .map_err(|e| e.to_string())?;
    let mut monitor = TrialMonitor::new(target.registry_size(), config.poll_interval_s, config.poll_ticks());
    let result = fuzzer.run(&mut monitor).map_err(|e| e.to_string())?;
    let polled = monitor.finish();
    if polled.skipped_polls > 0 {
        log::warn!("trial {trial_id}: {} polls skipped", polled.skipped_polls);
    }

    let inputs: Vec<Vec<u8>> = result.crashes.iter().map(|c| c.input.clone()).collect();
    let triage = replay_triage(target, &inputs).map_err(|e| format!("triage failed: {e}"))?;
    let bugs =
        bugs_for(target.name()).map(|d| BugTimes::from_events(d.id, &polled.events, config.duration_s)).collect();
    log::info!(
        "trial {trial_id}: {} execs, {} crashes, queue {}",
        result.stats.executions,
        result.crashes.len(),
        result.queue.len()
    );
    Ok(CampaignRecord {
        trial_id,
        fuzzer: config.fuzzer.clone(),
        target: target.name().to_owned(),
        rng_seed,
        duration_s: config.duration_s,
        poll_interval_s: config.poll_interval_s,
        bugs,
        crashes: result.crashes.iter().map(CrashSummary::from).collect(),
        triage,
        stats: result.stats,
    })
}
