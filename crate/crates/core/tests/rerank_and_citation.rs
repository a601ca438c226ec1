use std::collections::BTreeSet;

use forge_core::citation::{red_relabel, refer_score, CitedText};
use forge_core::topic::{consistency_filter, topic_distance, BinarySignature, DropReason};
use forge_core::{tokenize, MarkedSentence, StopwordSet};
use proptest::prelude::*;

fn set_distance(a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 0.0;
    }
    a.symmetric_difference(b).count() as f64 / total as f64
}

/// Straightforward two-pass filter over plain sets.
fn filter_oracle(sets: &[BTreeSet<u32>], upper: f64, lower: f64) -> Vec<usize> {
    let first: Vec<usize> = (0..sets.len())
        .filter(|&i| i == 0 || set_distance(&sets[0], &sets[i]) <= upper)
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    for i in first {
        if kept.iter().all(|&j| set_distance(&sets[i], &sets[j]) >= lower) {
            kept.push(i);
        }
    }
    kept
}

fn signatures(sets: &[BTreeSet<u32>]) -> Vec<BinarySignature> {
    sets.iter()
        .map(|s| BinarySignature {
            active: s.iter().copied().collect(),
            mu: 0.1,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn filter_matches_oracle(
        sets in prop::collection::vec(prop::collection::btree_set(0u32..10, 0..6), 1..10),
    ) {
        let sigs = signatures(&sets);
        let out = consistency_filter(&sigs, 0.9, 0.1).unwrap();
        prop_assert_eq!(&out.kept, &filter_oracle(&sets, 0.9, 0.1));
        prop_assert_eq!(out.kept[0], 0);
        prop_assert!(out.kept.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(out.kept.len() + out.dropped.len(), sets.len());
        for &i in &out.kept {
            prop_assert!(topic_distance(&sigs[0], &sigs[i]).unwrap() <= 0.9);
            for &j in out.kept.iter().filter(|&&j| j < i) {
                prop_assert!(topic_distance(&sigs[i], &sigs[j]).unwrap() >= 0.1);
            }
        }
        for &(i, reason) in &out.dropped {
            let far = topic_distance(&sigs[0], &sigs[i]).unwrap() > 0.9;
            prop_assert_eq!(reason == DropReason::Irrelevant, far);
        }
    }

    #[test]
    fn filter_is_a_subsequence_for_any_bounds(
        sets in prop::collection::vec(prop::collection::btree_set(0u32..6, 0..4), 1..8),
        lower in 0.0f64..0.5,
        upper in 0.5f64..1.0,
    ) {
        let out = consistency_filter(&signatures(&sets), upper, lower).unwrap();
        prop_assert_eq!(&out.kept, &filter_oracle(&sets, upper, lower));
    }
}

#[test]
fn relabeling_a_realistic_paragraph() {
    let stop = StopwordSet::english();
    let refs = vec![
        tokenize("Ada Lovelace wrote notes on the Analytical Engine designed by Babbage."),
        tokenize("Lovelace was the daughter of the poet Lord Byron."),
    ];
    let sentences = vec![
        MarkedSentence::new("Ada Lovelace was the daughter of Lord Byron.", 1),
        MarkedSentence::new("She wrote notes on the Analytical Engine.", 1),
        MarkedSentence::new("She is widely celebrated.", 0),
    ];
    let text = CitedText::new(sentences, refs).unwrap();
    let out = red_relabel(&text, &stop);
    assert_eq!(out.marks(), vec![2, 1, 0]);
    let (before, after) = (refer_score(&text, &stop), refer_score(&out, &stop));
    assert!(after.mean.unwrap() > before.mean.unwrap());
    assert_eq!(after.n, 2);
}
