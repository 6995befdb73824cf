use proptest::prelude::*;

use psbo::dataset::SizeClass;
use psbo::engine::schedule::keep_count;
use psbo::engine::tournament::{champion, pairwise_wins, Contender};
use psbo::engine::{apply_penalties, compute_ratio, rough_estimate_idw, select_for_retest};

fn error() -> impl Strategy<Value = f64> {
    prop_oneof![4 => 0.0..1.0f64, 1 => Just(1.0)]
}

proptest! {
    #[test]
    fn ratios_stay_clipped(e1 in 0.0..1.0f64, e2 in 0.0..1.0f64) {
        let r = compute_ratio(e1, e2);
        prop_assert!((0.25..=2.5).contains(&r));
    }

    #[test]
    fn rough_estimates_stay_between_the_clipped_ratios(
        e1 in error(),
        pairs in prop::collection::vec((0usize..6, 0.25..=2.5f64), 0..12),
    ) {
        let (d, r): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        let est = rough_estimate_idw(e1, &d, &r, false);
        prop_assert!(est <= 1.0);
        if e1 >= 1.0 {
            prop_assert_eq!(est, 1.0);
        } else if !r.is_empty() {
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(0.0, f64::max);
            prop_assert!(est >= (e1 * lo).min(1.0) - 1e-12);
            prop_assert!(est <= (e1 * hi).min(1.0) + 1e-12);
        }
    }

    #[test]
    fn retest_selection_is_a_small_set_of_eligible_combinations(
        errors in prop::collection::vec(error(), 0..40),
        seed in any::<u64>(),
        n_c in 1usize..12,
        spread in any::<bool>(),
    ) {
        let dist = |i: usize, j: usize| if i == j { 0 } else { ((seed ^ (i * j + i + j) as u64) % 5) as usize };
        let s = select_for_retest(&errors, dist, n_c, 2, spread);
        let eligible = errors.iter().filter(|&&e| e < 1.0).count();
        prop_assert_eq!(s.len(), eligible.min(n_c));
        let mut uniq = s.clone();
        uniq.sort_unstable();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), s.len());
        prop_assert!(s.iter().all(|&i| errors[i] < 1.0));
        if let Some(&first) = s.first() {
            prop_assert!(errors.iter().all(|&e| e >= errors[first]));
        }
    }

    #[test]
    fn penalties_never_lower_an_error(
        raw in 0.0..=1.0f64,
        fs in any::<bool>(),
        n_b in 0usize..4,
    ) {
        let x = apply_penalties(raw, fs.then_some(1.1), n_b, Some(0.02));
        prop_assert!(x >= raw && x <= 1.0);
        prop_assert_eq!(apply_penalties(raw, None, 0, Some(0.02)), raw);
    }

    #[test]
    fn the_champion_has_the_most_pairwise_wins(
        table in prop::collection::vec((prop::collection::vec(0u8..4, 3), 0u8..3, 0u8..3), 1..8),
    ) {
        let cs: Vec<Contender> = table
            .iter()
            .map(|(f, p, t)| Contender {
                fold_errors: f.iter().map(|&x| f64::from(x) / 4.0).collect(),
                prev_estimate: f64::from(*p) / 4.0,
                time: f64::from(*t),
            })
            .collect();
        let wins = pairwise_wins(&cs);
        let c = champion(&cs).unwrap();
        prop_assert_eq!(wins[c], *wins.iter().max().unwrap());
    }

    #[test]
    fn keep_counts_cover_the_fraction(keep in 0.01..=1.0f64, n in 1usize..200) {
        let k = keep_count(keep, n);
        prop_assert!(k >= 1 && k <= n);
        prop_assert!(k as f64 >= keep * n as f64 - 1e-9);
        prop_assert!(((k - 1) as f64) < keep * n as f64);
    }

    #[test]
    fn large_means_more_than_a_million_cells(n in 1usize..20_000, p in 1usize..500) {
        prop_assert_eq!(SizeClass::from_dims(n, p).is_large(), n * p > 1_000_000);
    }
}
