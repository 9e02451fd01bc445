use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::coverage::{is_interesting, CoverageMap, GlobalCoverage};
use super::mutate::{deterministic_stages, mutate, Stage};
use crate::canary::{BugRegistry, CanaryError};
use crate::targets::{ExecMode, Execution, Exit, Target, DEFAULT_STEP_LIMIT};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("a campaign needs at least one seed")]
    NoSeeds,
    #[error("campaign budget must be positive")]
    EmptyBudget,
    #[error("executor setup failed: {0}")]
    Executor(#[from] CanaryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzerConfig {
    /// Report multi-byte comparison progress as coverage.
    pub cmplog: bool,
    /// Run the deterministic stages once per queue entry.
    pub deterministic: bool,
    pub havoc_rounds: u32,
    pub splice_rounds: u32,
    pub step_limit: u64,
}

impl Default for FuzzerConfig {
    fn default() -> Self {
        Self {
            cmplog: false,
            deterministic: true,
            havoc_rounds: 256,
            splice_rounds: 32,
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Execs(u64),
    Seconds(f64),
}

/// Source of campaign timestamps. The virtual clock derives time from the
/// execution count, which makes time-based budgets reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    Wall,
    Virtual { execs_per_sec: f64 },
}

/// Hook invoked after every target execution, with the campaign time and
/// the registry state that execution left behind.
pub trait ExecObserver {
    fn after_exec(&mut self, now: f64, registry: &BugRegistry);
}

impl ExecObserver for () {
    fn after_exec(&mut self, _now: f64, _registry: &BugRegistry) {}
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueEntry {
    pub id: usize,
    pub input: Vec<u8>,
    /// Campaign time in seconds at which the entry was added.
    pub discovered_at: f64,
    /// Sorted `(map index, hit-count class)` pairs of the entry's run.
    pub signature: Vec<(u16, u8)>,
    pub favored: bool,
    #[serde(skip)]
    det_done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crash {
    pub id: usize,
    pub input: Vec<u8>,
    pub exit: Exit,
    pub discovered_at: f64,
}

impl Crash {
    pub fn file_name(&self) -> String {
        let tag = match self.exit {
            Exit::Clean => "clean".to_owned(),
            Exit::FatalCanary { bug } => format!("canary_{bug}"),
            Exit::ModeledFault { fault } => match fault.bug {
                Some(bug) => format!("fault_{bug}"),
                None => format!("fault_{:?}", fault.kind).to_lowercase(),
            },
        };
        format!("id_{:06}_{tag}", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub executions: u64,
    /// Campaign time at the end of the run, per the configured clock.
    pub elapsed_s: f64,
    /// Executions per second of wall time.
    pub exec_per_sec: f64,
    pub queue_size: usize,
    pub crash_count: usize,
    pub cycles: u64,
    pub coverage_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub queue: Vec<QueueEntry>,
    pub crashes: Vec<Crash>,
    pub stats: CampaignStats,
}

impl CampaignResult {
    /// Writes `queue/`, `crashes/` and `stats.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        let queue_dir = dir.join("queue");
        let crash_dir = dir.join("crashes");
        fs::create_dir_all(&queue_dir)?;
        fs::create_dir_all(&crash_dir)?;
        for e in &self.queue {
            fs::write(queue_dir.join(format!("id_{:06}", e.id)), &e.input)?;
        }
        for c in &self.crashes {
            fs::write(crash_dir.join(c.file_name()), &c.input)?;
        }
        let stats = serde_json::to_vec_pretty(&self.stats).map_err(io::Error::other)?;
        fs::write(dir.join("stats.json"), stats)
    }
}

/// Runs a coverage-guided campaign against `target` in fatal-canary mode.
/// With an execution budget the result depends only on the arguments.
pub fn fuzz_campaign(
    target: &dyn Target,
    seeds: &[Vec<u8>],
    budget: Budget,
    rng_seed: u64,
    config: &FuzzerConfig,
) -> Result<CampaignResult, CampaignError> {
    Fuzzer::new(target, seeds, budget, rng_seed, config.clone(), Clock::Wall)?.run(&mut ())
}

/// A single campaign in progress.
pub struct Fuzzer<'t> {
    target: &'t dyn Target,
    seeds: Vec<Vec<u8>>,
    budget: Budget,
    clock: Clock,
    config: FuzzerConfig,
    rng: ChaCha8Rng,
    registry: BugRegistry,
    run_map: CoverageMap,
    global: GlobalCoverage,
    crash_global: GlobalCoverage,
    crash_exits: BTreeSet<String>,
    queue: Vec<QueueEntry>,
    crashes: Vec<Crash>,
    favored_dirty: bool,
    execs: u64,
    cycles: u64,
    started: Instant,
}

impl<'t> Fuzzer<'t> {
    pub fn new(
        target: &'t dyn Target,
        seeds: &[Vec<u8>],
        budget: Budget,
        rng_seed: u64,
        config: FuzzerConfig,
        clock: Clock,
    ) -> Result<Self, CampaignError> {
        if seeds.is_empty() {
            return Err(CampaignError::NoSeeds);
        }
        let positive = match budget {
            Budget::Execs(n) => n > 0,
            Budget::Seconds(s) => s > 0.0,
        };
        if !positive {
            return Err(CampaignError::EmptyBudget);
        }
        let registry = BugRegistry::in_memory(target.registry_size(), ExecMode::Fatal.canary_mode())?;
        Ok(Self {
            target,
            seeds: seeds.to_vec(),
            budget,
            clock,
            config,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            registry,
            run_map: CoverageMap::new(),
            global: GlobalCoverage::new(),
            crash_global: GlobalCoverage::new(),
            crash_exits: BTreeSet::new(),
            queue: Vec::new(),
            crashes: Vec::new(),
            favored_dirty: true,
            execs: 0,
            cycles: 0,
            started: Instant::now(),
        })
    }

    pub fn run(mut self, observer: &mut dyn ExecObserver) -> Result<CampaignResult, CampaignError> {
        self.started = Instant::now();
        let _ = self.fuzz(observer);
        let wall = self.started.elapsed().as_secs_f64();
        let stats = CampaignStats {
            executions: self.execs,
            elapsed_s: self.now(),
            exec_per_sec: if wall > 0.0 { self.execs as f64 / wall } else { 0.0 },
            queue_size: self.queue.len(),
            crash_count: self.crashes.len(),
            cycles: self.cycles,
            coverage_pairs: self.global.pair_count(),
        };
        Ok(CampaignResult { queue: self.queue, crashes: self.crashes, stats })
    }

    /// Campaign time in seconds.
    pub fn now(&self) -> f64 {
        match self.clock {
            Clock::Wall => self.started.elapsed().as_secs_f64(),
            Clock::Virtual { execs_per_sec } => self.execs as f64 / execs_per_sec,
        }
    }

    fn exhausted(&self) -> bool {
        match self.budget {
            Budget::Execs(n) => self.execs >= n,
            Budget::Seconds(s) => self.now() >= s,
        }
    }

    fn fuzz(&mut self, observer: &mut dyn ExecObserver) -> ControlFlow<()> {
        for seed in self.seeds.clone() {
            let crashed = self.execute(&seed, observer);
            if !crashed {
                let signature = self.run_map.signature();
                is_interesting(&self.run_map, &mut self.global);
                self.push_entry(seed, signature);
            }
            if self.exhausted() {
                return ControlFlow::Break(());
            }
        }
        loop {
            if self.queue.is_empty() {
                // Every seed crashes: keep mutating the seeds themselves.
                for seed in self.seeds.clone() {
                    self.havoc_from(&seed, observer)?;
                }
            } else {
                for idx in self.schedule() {
                    self.fuzz_one(idx, observer)?;
                }
            }
            self.cycles += 1;
        }
    }

    /// Queue indices for one cycle: favored entries first, then the rest,
    /// each group in discovery order.
    fn schedule(&mut self) -> Vec<usize> {
        if self.favored_dirty {
            self.cull();
        }
        let (mut favored, rest): (Vec<usize>, Vec<usize>) = (0..self.queue.len()).partition(|&i| self.queue[i].favored);
        favored.extend(rest);
        favored
    }

    /// Marks the smallest entry for each `(index, class)` pair as favored.
    fn cull(&mut self) {
        let mut best: HashMap<(u16, u8), usize> = HashMap::new();
        for (i, e) in self.queue.iter().enumerate() {
            for &pair in &e.signature {
                best.entry(pair)
                    .and_modify(|cur| {
                        if e.input.len() < self.queue[*cur].input.len() {
                            *cur = i;
                        }
                    })
                    .or_insert(i);
            }
        }
        let winners: BTreeSet<usize> = best.into_values().collect();
        for (i, e) in self.queue.iter_mut().enumerate() {
            e.favored = winners.contains(&i);
        }
        self.favored_dirty = false;
    }

    fn fuzz_one(&mut self, idx: usize, observer: &mut dyn ExecObserver) -> ControlFlow<()> {
        let input = self.queue[idx].input.clone();
        if self.config.deterministic && !self.queue[idx].det_done {
            for stage in deterministic_stages(input.len()) {
                let candidate = mutate(&input, &mut self.rng, &stage).expect("deterministic stages stay in bounds");
                self.test_input(candidate, observer)?;
            }
            self.queue[idx].det_done = true;
        }
        self.havoc_from(&input, observer)?;
        if self.queue.len() > 1 {
            for _ in 0..self.config.splice_rounds {
                let mut other = self.rng.random_range(0..self.queue.len() - 1);
                if other >= idx {
                    other += 1;
                }
                let partner = self.queue[other].input.clone();
                let spliced = mutate(&input, &mut self.rng, &Stage::Splice(&partner)).expect("splice never fails");
                let ops = self.havoc_ops();
                let candidate = mutate(&spliced, &mut self.rng, &Stage::Havoc(ops)).expect("havoc never fails");
                self.test_input(candidate, observer)?;
            }
        }
        ControlFlow::Continue(())
    }

    fn havoc_from(&mut self, input: &[u8], observer: &mut dyn ExecObserver) -> ControlFlow<()> {
        for _ in 0..self.config.havoc_rounds {
            let ops = self.havoc_ops();
            let candidate = mutate(input, &mut self.rng, &Stage::Havoc(ops)).expect("havoc never fails");
            self.test_input(candidate, observer)?;
        }
        ControlFlow::Continue(())
    }

    fn havoc_ops(&mut self) -> u32 {
        1 << self.rng.random_range(1..=7u32)
    }

    /// Executes a candidate and files it as a crash or queue entry.
    fn test_input(&mut self, input: Vec<u8>, observer: &mut dyn ExecObserver) -> ControlFlow<()> {
        let crashed = self.execute(&input, observer);
        if !crashed && is_interesting(&self.run_map, &mut self.global) {
            let signature = self.run_map.signature();
            self.push_entry(input, signature);
        }
        if self.exhausted() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }

    fn push_entry(&mut self, input: Vec<u8>, signature: Vec<(u16, u8)>) {
        let id = self.queue.len();
        let discovered_at = self.now();
        self.queue.push(QueueEntry { id, input, discovered_at, signature, favored: false, det_done: false });
        self.favored_dirty = true;
    }

    /// Runs the target once; returns whether the run ended abnormally, in
    /// which case the input may be saved as a crash.
    fn execute(&mut self, input: &[u8], observer: &mut dyn ExecObserver) -> bool {
        self.registry.reset();
        self.run_map.reset();
        let mut exec = Execution::new(&mut self.registry, ExecMode::Fatal)
            .with_coverage(&mut self.run_map)
            .with_cmplog(self.config.cmplog)
            .with_step_limit(self.config.step_limit);
        let exit: Exit = match self.target.run(input, &mut exec) {
            Ok(()) => Exit::Clean,
            Err(abort) => abort.into(),
        };
        self.execs += 1;
        let now = self.now();
        observer.after_exec(now, &self.registry);
        if !exit.is_abnormal() {
            return false;
        }
        let new_exit = self.crash_exits.insert(format!("{exit:?}"));
        let new_path = is_interesting(&self.run_map, &mut self.crash_global);
        if new_exit || new_path {
            self.crashes.push(Crash { id: self.crashes.len(), input: input.to_vec(), exit, discovered_at: now });
        }
        true
    }
}
