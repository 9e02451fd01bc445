mod oracles;

use gtbench::fuzzer::CampaignStats;
use gtbench::orchestrator::{BugTimes, CampaignRecord, Observation, TriageReport};
use gtbench::survival::{
    bug_count_stats, km_estimate, mwu_test, normal_p_value, significance_matrix, survival_table, u_statistic,
    RankMethod,
};
use gtbench::targets::BugId;
use proptest::prelude::*;

use oracles::{mwu_enumeration, product_limit};

const GRID: [f64; 3] = [1.0, 2.0, 3.0];

fn check_against_oracle(obs: &[(f64, bool)]) {
    let curve = km_estimate(obs).unwrap();
    for k in 0..9 {
        let t = k as f64 * 0.5;
        let want = product_limit(obs, t);
        assert!((curve.at(t) - want).abs() < 1e-12, "{obs:?} at {t}: {} vs {want}", curve.at(t));
        let (lo, hi) = curve.band_at(t);
        assert!(0.0 <= lo && lo <= curve.at(t) + 1e-12 && curve.at(t) <= hi + 1e-12 && hi <= 1.0);
    }
}

#[test]
fn km_matches_product_limit_on_every_small_sample() {
    let items: Vec<(f64, bool)> = GRID.iter().flat_map(|&t| [(t, true), (t, false)]).collect();
    for n in 1..=5u32 {
        for code in 0..items.len().pow(n) {
            let mut c = code;
            let obs: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    let item = items[c % items.len()];
                    c /= items.len();
                    item
                })
                .collect();
            check_against_oracle(&obs);
        }
    }
}

fn observations() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((1u32..20, any::<bool>()).prop_map(|(t, e)| (t as f64 * 5.0, e)), 1..25)
}

proptest! {
    #[test]
    fn km_matches_product_limit(obs in observations()) {
        check_against_oracle(&obs);
    }

    #[test]
    fn km_is_non_increasing_in_unit_interval(obs in observations()) {
        let c = km_estimate(&obs).unwrap();
        let mut prev = 1.0;
        for &s in &c.survival {
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn censoring_an_event_never_lowers_survival(obs in observations(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(obs.len());
        let mut censored = obs.clone();
        censored[i].1 = false;
        let (a, b) = (km_estimate(&obs).unwrap(), km_estimate(&censored).unwrap());
        for k in 0..=100 {
            let t = k as f64;
            prop_assert!(b.at(t) >= a.at(t) - 1e-12);
        }
    }

    #[test]
    fn all_censored_stays_at_one(times in prop::collection::vec(1u32..100, 1..10)) {
        let obs: Vec<(f64, bool)> = times.iter().map(|&t| (t as f64, false)).collect();
        let c = km_estimate(&obs).unwrap();
        prop_assert!(c.is_empty());
        prop_assert_eq!(c.at(1e9), 1.0);
    }
}

/// Two tie-free samples drawn as a random split of distinct values.
fn tie_free(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max, 1..=max).prop_flat_map(|(n1, n2)| {
        Just((0..n1 + n2).map(|v| v as f64 * 1.5 + 0.25).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(move |v| (v[..n1].to_vec(), v[n1..].to_vec()))
    })
}

proptest! {
    #[test]
    fn exact_test_matches_enumeration((a, b) in tie_free(5)) {
        let r = mwu_test(&a, &b).unwrap();
        let (u, p) = mwu_enumeration(&a, &b);
        prop_assert_eq!(r.method, RankMethod::Exact);
        prop_assert_eq!(r.u, u);
        prop_assert!((r.p_value - p).abs() < 1e-12, "{} vs {}", r.p_value, p);
    }

    #[test]
    fn u_statistics_are_complementary(a in prop::collection::vec(0u8..6, 1..12), b in prop::collection::vec(0u8..6, 1..12)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let total = (a.len() * b.len()) as f64;
        prop_assert_eq!(u_statistic(&a, &b) + u_statistic(&b, &a), total);
        let (ab, ba) = (mwu_test(&a, &b).unwrap(), mwu_test(&b, &a).unwrap());
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }

    #[test]
    fn rank_test_is_invariant_under_increasing_maps(a in prop::collection::vec(0u8..20, 1..16), b in prop::collection::vec(0u8..20, 1..16)) {
        let f = |x: &u8| 2.0 * f64::from(*x) + 7.0;
        let raw = mwu_test(&a.iter().map(|&x| f64::from(x)).collect::<Vec<_>>(), &b.iter().map(|&x| f64::from(x)).collect::<Vec<_>>()).unwrap();
        let mapped = mwu_test(&a.iter().map(f).collect::<Vec<_>>(), &b.iter().map(f).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(raw, mapped);
    }

    #[test]
    fn normal_approximation_tracks_exact_at_ten((a, b) in tie_free(10).prop_filter("n = 10", |(a, b)| a.len() == 10 && b.len() == 10)) {
        let exact = mwu_test(&a, &b).unwrap();
        let approx = normal_p_value(exact.u, 10, 10, &[]);
        prop_assert!((exact.p_value - approx).abs() < 0.01, "{} vs {}", exact.p_value, approx);
    }
}

#[test]
fn identical_samples_give_unit_p_value() {
    let r = mwu_test(&[3.0, 3.0, 4.0], &[4.0, 3.0, 3.0]).unwrap();
    assert!(r.identical);
    assert_eq!(r.p_value, 1.0);
    assert!(!r.significant());
}

#[test]
fn large_samples_use_the_normal_approximation() {
    let a: Vec<f64> = (0..20).map(f64::from).collect();
    let b: Vec<f64> = (10..30).map(f64::from).collect();
    let r = mwu_test(&a, &b).unwrap();
    assert_eq!(r.method, RankMethod::NormalApprox);
    assert!(r.significant());
}

fn record(fuzzer: &str, trial: u32, duration: f64, bugs: &[(u32, Option<f64>, Option<f64>)]) -> CampaignRecord {
    let obs = |t: Option<f64>| t.map_or(Observation::Censored(duration), Observation::Observed);
    CampaignRecord {
        trial_id: trial,
        fuzzer: fuzzer.into(),
        target: "t".into(),
        rng_seed: u64::from(trial),
        duration_s: duration,
        poll_interval_s: 5.0,
        bugs: bugs
            .iter()
            .map(|&(id, r, t)| BugTimes { bug: BugId(id), first_reach: obs(r), first_trigger: obs(t) })
            .collect(),
        crashes: Vec::new(),
        triage: TriageReport::default(),
        stats: CampaignStats {
            executions: 0,
            elapsed_s: duration,
            exec_per_sec: 0.0,
            queue_size: 0,
            crash_count: 0,
            cycles: 0,
            coverage_pairs: 0,
        },
    }
}

#[test]
fn table_means_count_untriggered_trials_at_the_duration() {
    let records = vec![
        record("a", 0, 50.0, &[(0, Some(5.0), Some(10.0)), (1, None, None)]),
        record("a", 1, 50.0, &[(0, Some(5.0), Some(30.0)), (1, Some(40.0), None)]),
        record("b", 0, 50.0, &[(0, Some(5.0), Some(20.0)), (1, None, None)]),
        record("b", 1, 50.0, &[(0, Some(10.0), None), (1, None, None)]),
    ];
    let table = survival_table(&records).unwrap();
    assert_eq!(table.fuzzers, vec!["a", "b"]);
    let row = &table.rows[0];
    assert_eq!(row.bug, BugId(0));
    assert_eq!(row.cells[0].mean_trigger_s, 20.0);
    assert_eq!(row.cells[1].mean_trigger_s, 35.0);
    assert!(row.cells[0].best_trigger && !row.cells[1].best_trigger);
    assert_eq!(row.mean_trigger_s, 27.5);
    // Reach means are 5.0 and 7.5.
    assert!(row.cells[0].best_reach);
    let never = &table.rows[1];
    assert!(never.cells.iter().all(|c| c.mean_trigger_s == 50.0 && !c.best_trigger));
    assert_eq!(never.cells[0].mean_reach_s, 45.0);

    let stats = bug_count_stats(&records).unwrap();
    assert_eq!(stats[0].counts, vec![1, 1]);
    assert_eq!(stats[1].counts, vec![1, 0]);
    let matrix = significance_matrix(&stats).unwrap();
    assert_eq!(matrix.len(), 4);
    assert!(matrix.iter().filter(|c| c.fuzzer_a == c.fuzzer_b).all(|c| c.result.identical));
}

#[test]
fn mixed_durations_are_rejected() {
    let records = vec![record("a", 0, 50.0, &[]), record("a", 1, 60.0, &[])];
    assert!(survival_table(&records).is_err());
}

fn random_records() -> impl Strategy<Value = Vec<CampaignRecord>> {
    let times = prop::collection::vec((prop::option::of(1u32..=20), prop::option::of(0u32..=20)), 3);
    prop::collection::vec((0usize..3, times), 1..12).prop_map(|trials| {
        trials
            .into_iter()
            .enumerate()
            .map(|(i, (f, bugs))| {
                let bugs: Vec<_> = bugs
                    .into_iter()
                    .enumerate()
                    .map(|(b, (reach, delay))| {
                        let r = reach.map(|x| f64::from(x) * 5.0);
                        let t = r.zip(delay).map(|(r, d)| r + f64::from(d) * 5.0).filter(|&t| t <= 100.0);
                        (b as u32, r, t)
                    })
                    .collect();
                record(["x", "y", "z"][f], i as u32, 100.0, &bugs)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn table_is_consistent(records in random_records()) {
        let table = survival_table(&records).unwrap();
        prop_assert!(table.rows.windows(2).all(|w| w[0].mean_trigger_s <= w[1].mean_trigger_s));
        for row in &table.rows {
            prop_assert!(row.cells.iter().filter(|c| c.best_trigger).count() <= 1);
            for c in &row.cells {
                prop_assert!(c.mean_reach_s <= c.mean_trigger_s);
                prop_assert!(c.mean_trigger_s <= table.duration_s);
                if c.best_trigger {
                    prop_assert!(row.cells.iter().all(|o| o.mean_trigger_s >= c.mean_trigger_s));
                }
            }
        }
        let stats = bug_count_stats(&records).unwrap();
        for s in &stats {
            prop_assert!(s.counts.iter().all(|&c| c <= 3));
            prop_assert!(s.sd >= 0.0);
        }
        let n: usize = stats.iter().map(|s| s.counts.len()).sum();
        prop_assert_eq!(n, records.len());
    }
}
