use std::collections::BTreeSet;

use gtbench::canary::BugRegistry;
use gtbench::fuzzer::{
    bucket_class, coverage_index, fuzz_campaign, interesting_values, is_interesting, mutate, Budget, Clock,
    CoverageMap, ExecObserver, Fuzzer, FuzzerConfig, GlobalCoverage, Stage, MAX_INPUT_LEN,
};
use gtbench::targets::{self, bugs_for, run_driver, ExecMode, Execution, CHUNK_PARSER, KV_PARSER};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

proptest! {
    #[test]
    fn bitflip_is_an_involution(input in prop::collection::vec(any::<u8>(), 1..64), pos in any::<usize>()) {
        let pos = pos % (input.len() * 8);
        let once = mutate(&input, &mut rng(), &Stage::BitFlip(pos)).unwrap();
        prop_assert_ne!(&once, &input);
        let twice = mutate(&once, &mut rng(), &Stage::BitFlip(pos)).unwrap();
        prop_assert_eq!(twice, input);
    }

    #[test]
    fn byteflip_is_an_involution(input in prop::collection::vec(any::<u8>(), 1..64), pos in any::<usize>()) {
        let pos = pos % input.len();
        let once = mutate(&input, &mut rng(), &Stage::ByteFlip(pos)).unwrap();
        prop_assert_eq!(once[pos], !input[pos]);
        let twice = mutate(&once, &mut rng(), &Stage::ByteFlip(pos)).unwrap();
        prop_assert_eq!(twice, input);
    }

    #[test]
    fn deterministic_stages_ignore_the_rng(input in prop::collection::vec(any::<u8>(), 1..16), seed in any::<u64>(), pos in any::<usize>()) {
        let pos = pos % input.len();
        for stage in [Stage::Arith { pos, delta: -7 }, Stage::ByteFlip(pos), Stage::BitFlip(pos)] {
            let a = mutate(&input, &mut rng(), &stage).unwrap();
            let b = mutate(&input, &mut ChaCha8Rng::seed_from_u64(seed), &stage).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn out_of_bounds_positions_are_rejected(input in prop::collection::vec(any::<u8>(), 0..16)) {
        prop_assert!(mutate(&input, &mut rng(), &Stage::ByteFlip(input.len())).is_err());
        prop_assert!(mutate(&input, &mut rng(), &Stage::BitFlip(input.len() * 8)).is_err());
    }

    #[test]
    fn havoc_respects_the_size_cap(input in prop::collection::vec(any::<u8>(), 0..64), seed in any::<u64>(), ops in 1u32..128) {
        let out = mutate(&input, &mut ChaCha8Rng::seed_from_u64(seed), &Stage::Havoc(ops)).unwrap();
        prop_assert!(out.len() <= MAX_INPUT_LEN);
    }

    #[test]
    fn reversed_edges_get_distinct_indices(a in any::<u16>(), b in any::<u16>()) {
        // A->B hashes to (A>>1)^B after visiting A; B->A to (B>>1)^A.
        let ab = coverage_index(a >> 1, b);
        let ba = coverage_index(b >> 1, a);
        let collision = (a >> 1) ^ b == (b >> 1) ^ a;
        prop_assert_eq!(ab == ba, collision);
    }

    #[test]
    fn global_coverage_only_grows(runs in prop::collection::vec(prop::collection::vec((any::<u16>(), 1u8..=255), 0..20), 1..20)) {
        let mut global = GlobalCoverage::new();
        let mut seen: BTreeSet<(u16, u8)> = BTreeSet::new();
        for run in runs {
            let mut map = CoverageMap::new();
            for &(idx, count) in &run {
                map.set(idx as usize, count);
            }
            let before = global.pair_count();
            let novel = map.signature().iter().any(|p| !seen.contains(p));
            prop_assert_eq!(is_interesting(&map, &mut global), novel);
            seen.extend(map.signature());
            prop_assert!(global.pair_count() >= before);
            prop_assert_eq!(global.pair_count(), seen.len());
        }
    }
}

#[test]
fn bucket_classes_are_distinct() {
    let reps = [1u8, 2, 3, 4, 8, 16, 32, 128];
    let classes: BTreeSet<u8> = reps.iter().map(|&c| bucket_class(c)).collect();
    assert_eq!(classes.len(), 8);
    for (lo, hi) in [(4u8, 7u8), (8, 15), (16, 31), (32, 127), (128, 255)] {
        assert_eq!(bucket_class(lo), bucket_class(hi));
    }
}

#[test]
fn magic_constant_is_in_the_table_both_ways() {
    let encodings: Vec<Vec<u8>> = interesting_values().iter().map(|v| v.encode()).collect();
    assert!(encodings.contains(&vec![0x55; 4]));
    assert!(encodings.contains(&0x7FFF_FFFFu32.to_le_bytes().to_vec()));
    assert!(encodings.contains(&0x7FFF_FFFFu32.to_be_bytes().to_vec()));
}

fn cfg() -> FuzzerConfig {
    FuzzerConfig::default()
}

#[test]
fn campaigns_are_reproducible() {
    for name in [CHUNK_PARSER, KV_PARSER] {
        let t = targets::target(name).unwrap();
        let seeds = targets::seeds(name).unwrap();
        let a = fuzz_campaign(t, &seeds, Budget::Execs(30_000), 42, &cfg()).unwrap();
        let b = fuzz_campaign(t, &seeds, Budget::Execs(30_000), 42, &cfg()).unwrap();
        // Timestamps follow the wall clock; everything else must match.
        type Outcome = (Vec<(Vec<u8>, Vec<(u16, u8)>, bool)>, Vec<Vec<u8>>);
        let inputs = |r: &gtbench::fuzzer::CampaignResult| -> Outcome {
            (
                r.queue.iter().map(|e| (e.input.clone(), e.signature.clone(), e.favored)).collect(),
                r.crashes.iter().map(|c| c.input.clone()).collect(),
            )
        };
        assert_eq!(inputs(&a), inputs(&b));
        let c = fuzz_campaign(t, &seeds, Budget::Execs(30_000), 43, &cfg()).unwrap();
        assert_ne!(inputs(&a), inputs(&c), "{name}: different seeds should diverge");
    }
}

#[test]
fn saved_crashes_replay_abnormally_and_queue_entries_reproduce() {
    for name in [CHUNK_PARSER, KV_PARSER] {
        let t = targets::target(name).unwrap();
        let r = fuzz_campaign(t, &targets::seeds(name).unwrap(), Budget::Execs(40_000), 7, &cfg()).unwrap();
        assert!(!r.crashes.is_empty());
        for c in &r.crashes {
            let out = run_driver(name, &c.input, ExecMode::Fatal).unwrap();
            assert!(out.exit.is_abnormal(), "{name} crash {} replayed clean", c.id);
            assert_eq!(out.exit, c.exit);
        }
        let mut reg = BugRegistry::in_memory(t.registry_size(), ExecMode::Fatal.canary_mode()).unwrap();
        for e in &r.queue {
            let mut map = CoverageMap::new();
            let mut exec = Execution::new(&mut reg, ExecMode::Fatal).with_coverage(&mut map);
            t.run(&e.input, &mut exec).unwrap();
            assert_eq!(map.signature(), e.signature, "{name} queue entry {}", e.id);
            reg.reset();
        }
        let favored = r.queue.iter().filter(|e| e.favored).count();
        assert!(favored >= 1);
    }
}

struct Triggered(BTreeSet<usize>);

impl ExecObserver for Triggered {
    fn after_exec(&mut self, _now: f64, r: &BugRegistry) {
        for b in 0..r.bug_count() {
            if r.triggered(b) > 0 {
                self.0.insert(b);
            }
        }
    }
}

#[test]
fn shallow_bugs_fall_within_a_minute() {
    let t = targets::target(CHUNK_PARSER).unwrap();
    let fuzzer = Fuzzer::new(
        t,
        &targets::seeds(CHUNK_PARSER).unwrap(),
        Budget::Seconds(60.0),
        1,
        cfg(),
        Clock::Virtual { execs_per_sec: 2000.0 },
    )
    .unwrap();
    let mut seen = Triggered(BTreeSet::new());
    fuzzer.run(&mut seen).unwrap();
    for d in bugs_for(CHUNK_PARSER).filter(|d| d.shallow) {
        assert!(seen.0.contains(&d.id.index()), "{} not triggered", d.name);
    }
}

#[test]
fn output_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let t = targets::target(KV_PARSER).unwrap();
    let r = fuzz_campaign(t, &targets::seeds(KV_PARSER).unwrap(), Budget::Execs(5_000), 1, &cfg()).unwrap();
    r.write_to(dir.path()).unwrap();
    assert_eq!(std::fs::read_dir(dir.path().join("queue")).unwrap().count(), r.queue.len());
    assert_eq!(std::fs::read_dir(dir.path().join("crashes")).unwrap().count(), r.crashes.len());
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("stats.json")).unwrap()).unwrap();
    for key in ["executions", "exec_per_sec", "queue_size", "crash_count"] {
        assert!(stats.get(key).is_some(), "{key}");
    }
    assert_eq!(stats["executions"], 5_000);
}

#[test]
fn virtual_clock_campaigns_match_exactly() {
    let t = targets::target(KV_PARSER).unwrap();
    let seeds = targets::seeds(KV_PARSER).unwrap();
    let run = || {
        Fuzzer::new(t, &seeds, Budget::Seconds(10.0), 9, cfg(), Clock::Virtual { execs_per_sec: 1000.0 })
            .unwrap()
            .run(&mut ())
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.queue, b.queue);
    assert_eq!(a.crashes, b.crashes);
}
