mod oracles;

use gtbench::canary::{
    and_nb, not_nb, or_nb, read_report, BugCounters, BugRegistry, CanaryMode, RegistrySnapshot, HEADER_LEN, RECORD_LEN,
};
use oracles::RefCanary;
use proptest::prelude::*;

const BUGS: usize = 8;

fn events() -> impl Strategy<Value = Vec<(usize, bool)>> {
    // Out-of-range ids are included; both sides must ignore them.
    prop::collection::vec((0..BUGS + 2, prop::bool::weighted(0.05)), 0..400)
}

fn check_against_model(registry: &BugRegistry, model: &RefCanary) {
    assert_eq!(registry.faulty(), model.faulty);
    for b in 0..BUGS {
        assert_eq!(registry.reached(b), model.reached[b], "reached[{b}]");
        assert_eq!(registry.triggered(b), model.triggered[b], "triggered[{b}]");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn normal_mode_matches_reference(seq in events()) {
        let mut reg = BugRegistry::in_memory(BUGS, CanaryMode::Normal).unwrap();
        let mut model = RefCanary::new(BUGS);
        let mut prev = reg.snapshot();
        for &(bug, cond) in &seq {
            reg.log(bug, cond).unwrap();
            model.log(bug, cond);
            let snap = reg.snapshot();
            for b in 0..BUGS {
                prop_assert!(snap.triggered(b) <= snap.reached(b));
                prop_assert!(snap.reached(b) >= prev.reached(b));
                prop_assert!(snap.triggered(b) >= prev.triggered(b));
                if prev.faulty {
                    prop_assert_eq!(snap.counters[b], prev.counters[b]);
                }
            }
            prev = snap;
        }
        check_against_model(&reg, &model);
    }

    #[test]
    fn fatal_mode_stops_where_normal_freezes(seq in events()) {
        let mut fatal = BugRegistry::in_memory(BUGS, CanaryMode::Fatal).unwrap();
        let mut normal = BugRegistry::in_memory(BUGS, CanaryMode::Normal).unwrap();
        let first = seq.iter().position(|&(b, c)| b < BUGS && c);
        for (i, &(bug, cond)) in seq.iter().enumerate() {
            normal.log(bug, cond).unwrap();
            match fatal.log(bug, cond) {
                Ok(()) => prop_assert!(first.is_none_or(|f| i < f)),
                Err(e) => {
                    prop_assert_eq!(Some(i), first);
                    prop_assert_eq!(e.bug, bug);
                    break;
                }
            }
        }
        // Everything after the first trigger is frozen in normal mode.
        prop_assert_eq!(fatal.snapshot().counters, normal.snapshot().counters);
    }

    #[test]
    fn report_round_trip(
        faulty in any::<bool>(),
        counters in prop::collection::vec((any::<u64>(), any::<u64>()), 1..64),
    ) {
        let snap = RegistrySnapshot {
            timestamp: 0.0,
            faulty,
            counters: counters.iter().map(|&(r, t)| BugCounters { reached: r, triggered: t }).collect(),
        };
        let bytes = snap.encode();
        prop_assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN * counters.len());
        let decoded = RegistrySnapshot::decode(&bytes).unwrap();
        prop_assert_eq!(&decoded, &snap);
        prop_assert_eq!(decoded.encode(), bytes);
    }

    #[test]
    fn combinators_match_boolean_logic(a in any::<bool>(), b in any::<bool>()) {
        prop_assert_eq!(and_nb(a, b), a && b);
        prop_assert_eq!(or_nb(a, b), a || b);
        prop_assert_eq!(not_nb(a), !a);
    }
}

#[test]
fn mapped_report_is_readable_by_a_monitor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.bin");
    let mut reg = BugRegistry::create(4, CanaryMode::Normal, &path).unwrap();
    reg.log(1, false).unwrap();
    reg.log(2, true).unwrap();
    reg.log(3, true).unwrap();
    reg.flush().unwrap();
    let snap = read_report(&path).unwrap();
    assert_eq!(snap, reg.snapshot());
    assert_eq!(snap.first_triggered(), Some(2));
    assert_eq!(snap.reached(3), 0);
}
