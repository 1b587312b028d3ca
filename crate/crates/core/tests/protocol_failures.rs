use std::collections::BTreeSet;

use proptest::prelude::*;
use xref_core::netsim::{build_world, FailureEntry, FailureSchedule, SimConfig, SimWorld};
use xref_core::protocol::{expected_phase1_messages, ProtocolStatus, TOLERANCE_EXCEEDED};

fn world(m: u32, failures: &[(u32, u64)]) -> SimWorld {
    let mut cfg = SimConfig::new(m, 2);
    cfg.difficulty_bits = 4;
    cfg.seed = 21;
    cfg.failure_schedule =
        FailureSchedule::new(failures.iter().map(|&(domain, at_round)| FailureEntry { domain, at_round }).collect());
    build_world(cfg).unwrap()
}

#[test]
fn ten_domains_tolerate_three_failures() {
    let mut w = world(10, &[(2, 0), (5, 0), (9, 0)]);
    let out = w.run_flowchart2(0, 2, 3).unwrap();
    assert!(out.is_success());
    assert_eq!(out.completed_domains.len(), 7);
    for block in out.mined_blocks.values() {
        let x = block.cross_reference.as_ref().unwrap();
        assert_eq!(x.content_digests.len(), 7);
        assert_eq!(x.absent_domains, vec![2, 5, 9]);
    }
}

#[test]
fn four_failures_exceed_tolerance_three() {
    let mut w = world(10, &[(1, 0), (2, 0), (3, 0), (4, 0)]);
    let out = w.run_flowchart2(0, 2, 3).unwrap();
    assert_eq!(out.status, ProtocolStatus::Aborted { reason: TOLERANCE_EXCEEDED.into() });
}

#[test]
fn phase1_message_counts_are_quadratic() {
    for m in [2u32, 4, 8, 16] {
        let mut w = world(m, &[]);
        let out = w.run_flowchart1(0, 2).unwrap();
        assert_eq!(out.metrics.phase_messages[0], expected_phase1_messages(u64::from(m)), "m = {m}");
        assert_eq!(out.metrics.phase_rounds[0], 2);
    }
}

#[test]
fn flowchart2_cost_is_bounded_by_tolerance() {
    let m = 10;
    let base = world(m, &[]).run_flowchart1(0, 2).unwrap().metrics;
    for t in 1..=3u32 {
        let failures: Vec<(u32, u64)> = (1..=t).map(|d| (d, 0)).collect();
        let out = world(m, &failures).run_flowchart2(0, 2, t).unwrap();
        assert!(out.is_success());
        let k = u64::from(t) + 1;
        assert!(out.metrics.phase_messages[0] <= k * base.phase_messages[0], "t = {t}");
        assert!(out.metrics.phase_rounds[0] <= k * base.phase_rounds[0], "t = {t}");
    }
}

fn failure_set(m: u32, f: usize, max_round: u64) -> impl Strategy<Value = Vec<(u32, u64)>> {
    (proptest::sample::subsequence((1..m).collect::<Vec<_>>(), f), prop::collection::vec(0..=max_round, f))
        .prop_map(|(domains, rounds)| domains.into_iter().zip(rounds).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Failures before a CCN has sent its record leave exactly m - f digests.
    #[test]
    fn early_failures_leave_m_minus_f_digests(failures in (0usize..=3).prop_flat_map(|f| failure_set(10, f, 1))) {
        let f = failures.len();
        let mut w = world(10, &failures);
        let out = w.run_flowchart2(0, 2, 3).unwrap();
        prop_assert!(out.is_success());
        let failed: BTreeSet<u32> = failures.iter().map(|p| p.0).collect();
        let live: BTreeSet<u32> = (0..10).filter(|d| !failed.contains(d)).collect();
        prop_assert_eq!(&out.completed_domains, &live);
        for block in out.mined_blocks.values() {
            prop_assert_eq!(block.cross_reference.as_ref().unwrap().content_digests.len(), 10 - f);
        }
    }

    /// Failures at any time up to the tolerance never stop the live CCNs.
    #[test]
    fn live_ccns_complete_under_any_schedule(failures in (0usize..=3).prop_flat_map(|f| failure_set(10, f, 8))) {
        let mut w = world(10, &failures);
        let out = w.run_flowchart2(0, 2, 3).unwrap();
        prop_assert!(out.is_success());
        let failed: BTreeSet<u32> = failures.iter().map(|p| p.0).collect();
        for d in (0..10).filter(|d| !failed.contains(d)) {
            prop_assert!(out.completed_domains.contains(&d));
            let x = out.mined_blocks[&d].cross_reference.as_ref().unwrap();
            prop_assert!(x.content_digests.len() >= 10 - failures.len());
            prop_assert!(x.content_digests.len() + x.absent_domains.len() == 10);
        }
    }

    #[test]
    fn more_failures_than_tolerance_abort(failures in failure_set(10, 4, 0)) {
        let mut w = world(10, &failures);
        let out = w.run_flowchart2(0, 2, 3).unwrap();
        prop_assert_eq!(out.status, ProtocolStatus::Aborted { reason: TOLERANCE_EXCEEDED.into() });
    }
}
