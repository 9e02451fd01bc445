use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gtbench::canary::{self, BugRegistry, CanaryMode, ENV_REPORT_PATH, FATAL_EXIT_CODE};
use gtbench::diversity::{self, Profile};
use gtbench::fuzzer::{Budget, Clock, Fuzzer, FuzzerConfig};
use gtbench::orchestrator::{self, CampaignConfig, ConfigError};
use gtbench::survival;
use gtbench::targets::{self, BugId, ExecMode, Exit, TargetError};

/// Exit status of `exec` when a modeled fault aborts the run.
const FAULT_EXIT_CODE: u8 = 78;
/// Exit status for invalid arguments, matching clap's usage errors.
const USAGE_EXIT_CODE: u8 = 2;

#[derive(Parser)]
#[command(name = "gtbench", version, about = "Ground-truth fuzzing benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one input through a target driver.
    Exec(ExecArgs),
    /// List the injected bugs.
    Bugs {
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Write a bug's proof-of-vulnerability input.
    Pov {
        /// Bug name (e.g. CHK02) or numeric id.
        bug: String,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a target's built-in seed corpus.
    Seeds {
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a canary report file.
    Report { file: PathBuf },
    /// Run a single fuzzing campaign.
    Fuzz(FuzzArgs),
    /// Run repeated trials from a campaign config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Build survival tables, significance matrices and plots.
    Analyze {
        /// Campaign output directory or campaign.json file.
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
    },
    /// Emit operation-category profiles of a target over its seeds.
    Profile {
        #[arg(long)]
        target: String,
        /// Seed directory; the built-in seeds when absent.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Principal component analysis of operation profiles.
    Pca {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Component pairs to plot, 1-based, e.g. `1,2`. Defaults to
        /// consecutive pairs.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(usize, usize)>,
    },
}

#[derive(Args)]
struct ExecArgs {
    #[arg(long)]
    target: String,
    /// Input file; standard input when absent.
    file: Option<PathBuf>,
    /// normal, fatal or detect. Defaults to fatal when BENCH_FATAL=1.
    #[arg(long)]
    mode: Option<ExecMode>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    target: String,
    /// Seed directory; the built-in seeds when absent.
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long, conflicts_with = "execs", required_unless_present = "execs")]
    duration: Option<f64>,
    #[arg(long)]
    execs: Option<u64>,
    /// Measure `--duration` on a virtual clock running at this rate.
    #[arg(long)]
    execs_per_sec: Option<f64>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Report comparison progress as coverage.
    #[arg(long)]
    cmplog: bool,
    /// Skip the deterministic stages.
    #[arg(long)]
    no_deterministic: bool,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(a)?, parse(b)?))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| {
                let target = c.downcast_ref::<TargetError>().or(match c.downcast_ref::<ConfigError>() {
                    Some(ConfigError::Target(t)) => Some(t),
                    _ => None,
                });
                matches!(target, Some(TargetError::UnknownTarget(_) | TargetError::UnknownBug(_)))
            });
            ExitCode::from(if usage { USAGE_EXIT_CODE } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Exec(args) => exec(args),
        Command::Bugs { target, json } => bugs(target.as_deref(), json),
        Command::Pov { bug, out } => pov(&bug, out.as_deref()),
        Command::Seeds { target, out } => seeds(&target, &out),
        Command::Report { file } => report(&file),
        Command::Fuzz(args) => fuzz(args),
        Command::Run { config, out } => run(&config, &out),
        Command::Analyze { records, out, plots } => analyze(&records, &out, plots),
        Command::Profile { target, seeds, out } => profile(&target, seeds.as_deref(), &out),
        Command::Pca { profiles, k, out, pairs } => pca(&profiles, k, &out, pairs),
    }
}

fn read_input(file: Option<&Path>) -> Result<Vec<u8>> {
    match file {
        Some(path) => fs::read(path).with_context(|| format!("reading {}", path.display())),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).context("reading standard input")?;
            Ok(buf)
        }
    }
}

fn exec(args: ExecArgs) -> Result<ExitCode> {
    let target = targets::target(&args.target)?;
    let mode = args.mode.unwrap_or(match CanaryMode::from_env() {
        CanaryMode::Fatal => ExecMode::Fatal,
        CanaryMode::Normal => ExecMode::Normal,
    });
    let input = read_input(args.file.as_deref())?;
    let mut registry = match std::env::var_os(ENV_REPORT_PATH) {
        Some(path) => BugRegistry::create(target.registry_size(), mode.canary_mode(), Path::new(&path))?,
        None => BugRegistry::in_memory(target.registry_size(), mode.canary_mode())?,
    };
    let outcome = targets::execute(target, &input, mode, &mut registry);
    registry.flush().context("flushing canary report")?;
    println!("{}", serde_json::to_string(&outcome)?);
    io::stdout().flush()?;
    Ok(match outcome.exit {
        Exit::Clean => ExitCode::SUCCESS,
        Exit::FatalCanary { bug } => {
            log::warn!("fatal canary {bug}");
            ExitCode::from(FATAL_EXIT_CODE as u8)
        }
        Exit::ModeledFault { fault } => {
            log::warn!("modeled fault {:?}", fault.kind);
            ExitCode::from(FAULT_EXIT_CODE)
        }
    })
}

fn bugs(target: Option<&str>, json: bool) -> Result<ExitCode> {
    let listing = targets::list_bugs(target);
    if json {
        println!("{}", serde_json::to_string_pretty(&listing)?);
    } else {
        for d in &listing.bugs {
            println!(
                "{:>3} {:<6} {:<13} {:<24} detectable={} pov={}",
                d.id.0,
                d.name,
                d.target,
                format!("{:?}", d.class),
                d.detectable,
                d.has_pov
            );
        }
        println!("{} bugs over {} targets, density {:.2}", listing.bugs.len(), listing.targets, listing.density);
    }
    Ok(ExitCode::SUCCESS)
}

fn resolve_bug(name: &str) -> Result<BugId, TargetError> {
    if let Some(d) = targets::descriptor_by_name(name) {
        return Ok(d.id);
    }
    name.parse::<u32>()
        .ok()
        .map(BugId)
        .filter(|id| targets::descriptor(*id).is_some())
        .ok_or_else(|| TargetError::UnknownBug(name.to_owned()))
}

fn pov(bug: &str, out: Option<&Path>) -> Result<ExitCode> {
    let input = targets::pov(resolve_bug(bug)?)?;
    match out {
        Some(path) => fs::write(path, &input).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(&input)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn seeds(target: &str, out: &Path) -> Result<ExitCode> {
    let corpus = targets::seeds(target)?;
    fs::create_dir_all(out)?;
    for (i, seed) in corpus.iter().enumerate() {
        fs::write(out.join(format!("seed_{i:03}")), seed)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn report(file: &Path) -> Result<ExitCode> {
    let snapshot = canary::read_report(file).with_context(|| format!("reading {}", file.display()))?;
    println!("{}", serde_json::to_string_pretty(&snapshot)?);
    Ok(ExitCode::SUCCESS)
}

fn load_seed_dir(dir: &Path) -> Result<Vec<Vec<u8>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let seeds = paths.iter().map(fs::read).collect::<io::Result<Vec<_>>>()?;
    if seeds.is_empty() {
        bail!("no seed files in {}", dir.display());
    }
    Ok(seeds)
}

fn fuzz(args: FuzzArgs) -> Result<ExitCode> {
    let target = targets::target(&args.target)?;
    let seeds = match &args.seeds {
        Some(dir) => load_seed_dir(dir)?,
        None => targets::seeds(&args.target)?,
    };
    let budget = match (args.execs, args.duration) {
        (Some(n), _) => Budget::Execs(n),
        (None, Some(s)) => Budget::Seconds(s),
        (None, None) => bail!("either --duration or --execs is required"),
    };
    let clock = match args.execs_per_sec {
        Some(execs_per_sec) => Clock::Virtual { execs_per_sec },
        None => Clock::Wall,
    };
    let config = FuzzerConfig { cmplog: args.cmplog, deterministic: !args.no_deterministic, ..FuzzerConfig::default() };
    let result = Fuzzer::new(target, &seeds, budget, args.rng_seed, config, clock)?.run(&mut ())?;
    result.write_to(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{}", serde_json::to_string_pretty(&result.stats)?);
    Ok(ExitCode::SUCCESS)
}

fn run(config_path: &Path, out: &Path) -> Result<ExitCode> {
    let config = CampaignConfig::load(config_path)?;
    let report = orchestrator::run_trials(&config)?;
    report.write_to(out)?;
    println!("{} of {} trials valid; results in {}", report.trials_valid, report.trials_requested, out.display());
    for bad in &report.invalid {
        eprintln!("trial {} invalid: {}", bad.trial_id, bad.reason);
    }
    Ok(ExitCode::SUCCESS)
}

fn analyze(records: &Path, out: &Path, plots: bool) -> Result<ExitCode> {
    let reports = orchestrator::load_reports(records)?;
    let summary = survival::analyze(&reports, out, plots)?;
    println!("analyzed {} trial records ({} invalid trials excluded)", summary.records, summary.invalid_trials);
    for f in &summary.files {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn profile(target: &str, seed_dir: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let corpus = match seed_dir {
        Some(dir) => load_seed_dir(dir)?,
        None => targets::seeds(target)?,
    };
    fs::create_dir_all(out)?;
    for (i, input) in corpus.iter().enumerate() {
        let p = Profile {
            subject: target.to_owned(),
            seed: format!("seed_{i:03}"),
            family: Some("gtbench".to_owned()),
            counts: targets::profile(target, input)?.to_map(),
        };
        let path = out.join(format!("{target}_seed_{i:03}.json"));
        fs::write(&path, serde_json::to_vec_pretty(&p)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn pca(profiles: &Path, k: usize, out: &Path, pairs: Vec<(usize, usize)>) -> Result<ExitCode> {
    let profiles = diversity::load_profiles(profiles)?;
    let matrix = diversity::build_matrix(&profiles)?;
    let result = diversity::pca(&matrix, k)?;
    let pairs = if pairs.is_empty() { (1..k).step_by(2).map(|a| (a, a + 1)).collect() } else { pairs };
    let mut files = diversity::write_tables(&result, out)?;
    files.extend(diversity::scatter_export(&result, &pairs, out)?);
    if !result.dropped.is_empty() {
        eprintln!("dropped zero-variance categories: {}", result.dropped.join(", "));
    }
    for f in &files {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}
