use std::collections::BTreeMap;

use mixforge::registry::LanguageCode;
use mixforge::sampling::{schedule_documents, shuffle_order, unimax_allocate, DocIndex, SamplerConfig};
use proptest::prelude::*;

fn code(i: usize) -> LanguageCode {
    let a = (b'a' + (i / 26) as u8) as char;
    let b = (b'a' + (i % 26) as u8) as char;
    LanguageCode::new(&format!("x{a}{b}_Latn")).unwrap()
}

fn counts(raw: &[u64]) -> BTreeMap<LanguageCode, u64> {
    raw.iter().enumerate().map(|(i, &r)| (code(i), r)).collect()
}

/// Water level found by bisection over the reals: the level `l` at which
/// `sum(min(cap_i, l)) == budget`.
fn water_level(caps: &[u64], budget: u64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, *caps.iter().max().unwrap() as f64);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        let filled: f64 = caps.iter().map(|&c| (c as f64).min(mid)).sum();
        if filled < budget as f64 {
            lo = mid
        } else {
            hi = mid
        }
    }
    hi
}

fn instance() -> impl Strategy<Value = (Vec<u64>, u64, u64)> {
    (prop::collection::vec(1u64..5_000_000, 1..30), 1u64..6).prop_flat_map(|(raw, cap)| {
        let capacity: u64 = raw.iter().map(|r| r * cap).sum();
        (Just(raw), 1..=capacity, Just(cap))
    })
}

proptest! {
    #[test]
    fn matches_bisection_oracle((raw, budget, cap) in instance()) {
        let plan = unimax_allocate(&counts(&raw), &SamplerConfig { epoch_cap: cap, ..SamplerConfig::new(budget) }).unwrap();
        let caps: Vec<u64> = raw.iter().map(|r| r * cap).collect();
        let level = water_level(&caps, budget);
        prop_assert_eq!(plan.total_allocated(), budget);
        for (entry, &c) in plan.entries.iter().zip(&caps) {
            let ideal = (c as f64).min(level);
            prop_assert!(entry.allocated <= c);
            prop_assert!((entry.allocated as f64 - ideal).abs() <= 1.0 + 1e-6 * ideal, "{} vs {}", entry.allocated, ideal);
        }
    }

    #[test]
    fn budget_monotone((raw, budget, cap) in instance(), extra in 0u64..1_000_000) {
        let total: u64 = raw.iter().map(|r| r * cap).sum();
        let bigger = (budget + extra).min(total);
        let run = |n| unimax_allocate(&counts(&raw), &SamplerConfig { epoch_cap: cap, ..SamplerConfig::new(n) }).unwrap();
        let (small, large) = (run(budget), run(bigger));
        for (a, b) in small.entries.iter().zip(&large.entries) {
            // Leftover tokens may move between languages by one.
            prop_assert!(b.allocated + 1 >= a.allocated);
        }
    }

    #[test]
    fn scaling_commutes((raw, budget, cap) in instance(), k in 2u64..50) {
        let run = |raw: &[u64], n| unimax_allocate(&counts(raw), &SamplerConfig { epoch_cap: cap, ..SamplerConfig::new(n) }).unwrap();
        let scaled_raw: Vec<u64> = raw.iter().map(|r| r * k).collect();
        let base = run(&raw, budget);
        let scaled = run(&scaled_raw, budget * k);
        for (a, b) in base.entries.iter().zip(&scaled.entries) {
            prop_assert!(b.allocated.abs_diff(a.allocated * k) <= k);
        }
    }

    #[test]
    fn shuffle_is_a_permutation(n in 0usize..500, seed in any::<u64>(), epoch in 1u32..5) {
        let mut order = shuffle_order(n, seed, &code(3), epoch);
        order.sort_unstable();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn schedule_independent_of_workers(
        lens in prop::collection::vec(prop::collection::vec(1u64..500, 1..40), 1..6),
        seed in any::<u64>(),
        cap in 1u64..4,
    ) {
        let raw: Vec<u64> = lens.iter().map(|l| l.iter().sum()).collect();
        let budget = raw.iter().sum::<u64>() * cap / 2 + 1;
        let plan = unimax_allocate(&counts(&raw), &SamplerConfig { epoch_cap: cap, ..SamplerConfig::new(budget) }).unwrap();
        let index: DocIndex = lens
            .iter()
            .enumerate()
            .map(|(i, l)| (code(i), l.iter().enumerate().map(|(j, &t)| (format!("d{i}-{j}"), t)).collect()))
            .collect();
        let one = schedule_documents(&plan, &index, seed, 1).unwrap();
        for workers in [2, 4, 0] {
            prop_assert_eq!(&one, &schedule_documents(&plan, &index, seed, workers).unwrap());
        }
        for lang in &one.languages {
            prop_assert!(lang.realized <= lang.allocated);
        }
    }
}
