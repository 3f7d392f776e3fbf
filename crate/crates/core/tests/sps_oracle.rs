//! SPS resource exclusion and ranking on a 10-subframe x 2-subchannel toy
//! pool, checked against exhaustive enumeration.

mod common;

use std::collections::BTreeSet;

use cv2x::pool::ResourceId;
use cv2x::sps::{SelectionWindow, SensedEntry};
use proptest::prelude::*;

use common::toy::{entry, scripted_history as script, state_with, toy_pool, K, NOW, RRI};
use common::{reference_candidates, reference_lowest, reference_rssi};

#[test]
fn scripted_history() {
    let pool = toy_pool();
    let window = SelectionWindow::new(NOW, 1, 10);
    assert_eq!(window.size(&pool, 1), 20);

    let sensing = script();
    let state = state_with(sensing.clone());

    let candidates = state.build_candidate_set(&window, &pool);
    assert_eq!(candidates.len(), 18);
    assert!(!candidates.contains(&ResourceId::new(1005, 0)));
    assert!(!candidates.contains(&ResourceId::new(1003, 1)));
    assert!(candidates.contains(&ResourceId::new(1002, 1)));
    assert_eq!(
        candidates,
        reference_candidates(1001, 1010, 2, &sensing, -110.0)
    );

    let best = state.lowest_rssi_set(&candidates, state.target_size(&window, &pool), &pool);
    let got: BTreeSet<ResourceId> = best.sure.iter().chain(&best.ties).copied().collect();
    // levels 0, 1, 2, 3 sit at phases 0, 3, 6, 9 of subchannel 0
    let expected: BTreeSet<ResourceId> = [1010, 1003, 1006, 1009]
        .into_iter()
        .map(|sf| ResourceId::new(sf, 0))
        .collect();
    assert_eq!(got, expected);
    assert_eq!(best.len(), K);
}

fn arb_entry() -> impl Strategy<Value = SensedEntry> {
    let decoded = prop_oneof![
        Just(None),
        (
            prop::sample::select(vec![10u64, 20, 50, 100, 500]),
            -125.0f64..-85.0
        )
            .prop_map(Some),
    ];
    (0u64..1000, 0u32..2, -120.0f64..-70.0, decoded)
        .prop_map(|(age, sc, rssi, d)| entry(NOW - age, sc, rssi, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_exhaustive_reference(sensing in prop::collection::vec(arb_entry(), 0..40)) {
        let pool = toy_pool();
        let window = SelectionWindow::new(NOW, 1, 10);
        let state = state_with(sensing.clone());

        let candidates = state.build_candidate_set(&window, &pool);
        prop_assert_eq!(&candidates, &reference_candidates(1001, 1010, 2, &sensing, -110.0));

        let k = state.target_size(&window, &pool);
        prop_assert_eq!(k, K);
        let best = state.lowest_rssi_set(&candidates, k, &pool);
        let got: BTreeSet<ResourceId> = best.sure.iter().chain(&best.ties).copied().collect();
        prop_assert_eq!(&got, &reference_lowest(&candidates, k, &sensing, RRI));

        // `sure` is everything strictly below the k-th smallest level
        if !candidates.is_empty() {
            let mut levels: Vec<f64> = candidates
                .iter()
                .map(|r| reference_rssi(r, &sensing, RRI))
                .collect();
            levels.sort_by(f64::total_cmp);
            let cutoff = levels[k.min(candidates.len()) - 1];
            let sure: BTreeSet<ResourceId> = candidates
                .iter()
                .filter(|r| reference_rssi(r, &sensing, RRI) < cutoff)
                .copied()
                .collect();
            prop_assert_eq!(best.sure.iter().copied().collect::<BTreeSet<_>>(), sure);
            prop_assert_eq!(best.len(), k.min(candidates.len()));
        }

        // threshold relaxation in 3 dB steps
        let strongest = sensing
            .iter()
            .filter_map(|e| e.decoded.as_ref().map(|d| d.rsrp_dbm))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut threshold = -110.0;
        let expected = loop {
            let c = reference_candidates(1001, 1010, 2, &sensing, threshold);
            if c.len() >= K || threshold > strongest {
                break c;
            }
            threshold += 3.0;
        };
        prop_assert_eq!(state.relaxed_candidates(&window, &pool), expected);
    }
}
