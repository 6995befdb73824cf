use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use psbo::bench::{trace_cost, trace_distinct};
use psbo::config::SearchConfig;
use psbo::engine::trace::{from_jsonl, to_jsonl};
use psbo::engine::{run_search, SearchOutcome, Source, Step, TraceRecord, ROUNDS};
use psbo::hyperspace::{check_validity, default_rules, Combination};
use psbo::learnzoo::registry::entry;
use psbo::learnzoo::EvalStatus;
use psbo::surrogate::Provenance;

fn data() -> &'static psbo::dataset::Dataset {
    static D: OnceLock<psbo::dataset::Dataset> = OnceLock::new();
    D.get_or_init(|| psbo::synth::credit_like(450, 4))
}

fn outcome() -> &'static SearchOutcome {
    static O: OnceLock<SearchOutcome> = OnceLock::new();
    O.get_or_init(|| run_search(data(), &SearchConfig { seed: 5, ..SearchConfig::default() }).unwrap())
}

fn round_starts(trace: &[TraceRecord]) -> Vec<&TraceRecord> {
    trace.iter().filter(|t| matches!(t, TraceRecord::RoundStart { .. })).collect()
}

fn survivors_at(trace: &[TraceRecord], round: usize) -> Vec<String> {
    trace
        .iter()
        .find_map(|t| match t {
            TraceRecord::RoundStart { round: r, survivors, .. } if *r == round => Some(survivors.clone()),
            _ => None,
        })
        .unwrap()
}

#[test]
fn five_rounds_with_decreasing_cycles() {
    let o = outcome();
    assert!(!o.report.truncated);
    let cycles: Vec<Option<usize>> = round_starts(&o.trace)
        .iter()
        .map(|t| match t {
            TraceRecord::RoundStart { cycles, .. } => *cycles,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(cycles, [None, Some(3), Some(2), Some(1), None]);
}

/// Non-degenerate optimization tests per algorithm in `round`.
fn optimize_successes(trace: &[TraceRecord], round: usize) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for t in trace {
        if let TraceRecord::Eval { round: r, algorithm, step: Step::Optimize, status, .. } = t {
            if *r == round && *status != EvalStatus::DegenerateFs {
                *m.entry(algorithm.clone()).or_insert(0) += 1;
            }
        }
    }
    m
}

#[test]
fn each_cycle_tests_ten_proposals_per_survivor() {
    let o = outcome();
    for (round, cycles) in [(2, 3), (3, 2), (4, 1)] {
        let got = optimize_successes(&o.trace, round);
        for a in survivors_at(&o.trace, round) {
            assert_eq!(got.get(&a).copied().unwrap_or(0), 10 * cycles, "round {round}, {a}");
        }
    }
}

#[test]
fn proposal_batches_start_guided_and_alternate() {
    // A cycle may stop mid-batch; the next batch starts with a guided
    // proposal again, so only "random follows guided" holds across batches.
    let o = outcome();
    let mut by_alg: BTreeMap<(usize, String), Vec<Source>> = BTreeMap::new();
    for t in &o.trace {
        if let TraceRecord::Propose { round, algorithm, source, .. } = t {
            if *round >= 2 && *source != Source::Retest {
                by_alg.entry((*round, algorithm.clone())).or_default().push(*source);
            }
        }
    }
    assert!(!by_alg.is_empty());
    for ((round, alg), sources) in by_alg {
        assert_eq!(sources[0], Source::Guided, "round {round}, {alg}");
        for (i, w) in sources.windows(2).enumerate() {
            if w[1] == Source::Random {
                assert_eq!(w[0], Source::Guided, "round {round}, {alg}, proposal {}", i + 1);
            }
        }
        let guided = sources.iter().filter(|&&s| s == Source::Guided).count();
        assert!(guided * 2 >= sources.len());
    }
}

#[test]
fn retests_are_capped_and_rough_estimates_stay_in_range() {
    let o = outcome();
    let mut retests: BTreeMap<(usize, String), usize> = BTreeMap::new();
    for t in &o.trace {
        match t {
            TraceRecord::Propose { round, algorithm, source: Source::Retest, .. } => {
                *retests.entry((*round, algorithm.clone())).or_default() += 1;
            }
            TraceRecord::Inject { raw_error, adjusted_error, provenance: Provenance::RoughIdw, .. } => {
                assert!((0.0..=1.0).contains(raw_error));
                assert!(adjusted_error >= raw_error && *adjusted_error <= 1.0);
            }
            _ => {}
        }
    }
    assert!(!retests.is_empty());
    assert!(retests.values().all(|&n| n <= 10));
}

#[test]
fn cache_points_are_injected_for_every_survivor_with_feature_selection() {
    let o = outcome();
    let entries = o
        .trace
        .iter()
        .filter(|t| matches!(t, TraceRecord::Eval { round: 1, cached: Some(_), .. }))
        .count();
    let with_fs = survivors_at(&o.trace, 2)
        .iter()
        .filter(|a| entry(a).unwrap().space.param("fs.use").is_some())
        .count();
    let injected = o
        .trace
        .iter()
        .filter(|t| matches!(t, TraceRecord::Inject { round: 1, provenance: Provenance::CacheInjected, .. }))
        .count();
    assert!(entries > 0, "the run produced no cache entries");
    assert_eq!(injected, entries * with_fs);
    for t in &o.trace {
        if let TraceRecord::Inject { provenance: Provenance::CacheInjected, raw_error, adjusted_error, .. } = t {
            assert_eq!((*raw_error, *adjusted_error), (1.0, 1.0));
        }
    }
}

#[test]
fn later_rounds_prune_one_pooled_ranking() {
    let o = outcome();
    for round in 2..ROUNDS {
        let stages: Vec<(&str, BTreeSet<&str>)> = o
            .trace
            .iter()
            .filter_map(|t| match t {
                TraceRecord::Prune { round: r, stage, entries, .. } if *r == round => {
                    Some((stage.as_str(), entries.iter().map(|e| e.algorithm.as_str()).collect()))
                }
                _ => None,
            })
            .collect();
        assert_eq!(stages.len(), 1, "round {round}");
        let start = survivors_at(&o.trace, round);
        assert_eq!(stages[0].1, start.iter().map(String::as_str).collect::<BTreeSet<_>>());
    }
}

#[test]
fn rule_rejected_combinations_never_run() {
    let o = outcome();
    let meta = data().meta();
    let rules = default_rules();
    let mut rejected = 0;
    for t in &o.trace {
        match t {
            TraceRecord::Eval { algorithm, combination, status, .. } => {
                assert_ne!(*status, EvalStatus::RuleSkip);
                let c = Combination::new(algorithm.clone(), combination.clone());
                assert!(check_validity(&c, &meta, &rules).is_ok(), "{}", c.key());
            }
            TraceRecord::Skip { status: EvalStatus::RuleSkip, .. } => rejected += 1,
            _ => {}
        }
    }
    assert!(rejected > 0);
}

#[test]
fn report_totals_recompute_from_the_trace() {
    let o = outcome();
    assert_eq!(o.report.total_cost, trace_cost(&o.trace));
    assert_eq!(o.report.distinct_combinations, trace_distinct(&o.trace));
    let evals = o.trace.iter().filter(|t| matches!(t, TraceRecord::Eval { .. })).count();
    let finals = o.trace.iter().filter(|t| matches!(t, TraceRecord::FinalCv { time, .. } if *time > 0.0)).count();
    assert_eq!(o.report.evaluations, evals + finals);
}

#[test]
fn trace_round_trips_through_jsonl() {
    let o = outcome();
    let text = to_jsonl(&o.trace).unwrap();
    assert_eq!(from_jsonl(&text).unwrap(), o.trace);
}

#[test]
fn champion_is_the_traced_tournament_winner() {
    let o = outcome();
    let champ = o.trace.iter().rev().find_map(|t| match t {
        TraceRecord::Champion { algorithm, combination, method, .. } => Some((algorithm, combination, method)),
        _ => None,
    });
    let (alg, comb, method) = champ.unwrap();
    assert_eq!(method, "tournament");
    assert_eq!(*alg, o.report.champion.algorithm);
    assert_eq!(*comb, o.model.combination.values);
    assert!(o.trace.iter().any(
        |t| matches!(t, TraceRecord::FinalCv { algorithm, combination, .. } if algorithm == alg && combination == comb)
    ));
}

#[test]
fn single_fold_plan_when_technique_2_is_off() {
    let cfg = SearchConfig {
        seed: 5,
        technique_off: vec![2],
        algorithms: Some(vec!["naive_bayes".into(), "decision_tree".into()]),
        ..SearchConfig::default()
    };
    let o = run_search(data(), &cfg).unwrap();
    for t in round_starts(&o.trace) {
        if let TraceRecord::RoundStart { round, sample_sizes, .. } = t {
            if *round < ROUNDS {
                assert_eq!(sample_sizes.len(), 1);
            }
        }
    }
    assert!(o.trace.iter().all(|t| match t {
        TraceRecord::Eval { fold_errors, .. } => fold_errors.len() <= 1,
        _ => true,
    }));
}

#[test]
fn technique_4_off_picks_the_lowest_estimate_without_final_cv() {
    let cfg = SearchConfig {
        seed: 5,
        technique_off: vec![4],
        algorithms: Some(vec!["naive_bayes".into(), "decision_tree".into(), "knn".into()]),
        ..SearchConfig::default()
    };
    let o = run_search(data(), &cfg).unwrap();
    assert!(!o.trace.iter().any(|t| matches!(t, TraceRecord::FinalCv { .. })));
    assert_eq!(o.report.champion.method, "lowest-estimate");
    assert_eq!(o.report.champion.cv_mean, None);
}

#[test]
fn a_global_budget_truncates_the_search() {
    let cfg = SearchConfig { seed: 5, budget: Some(50.0), ..SearchConfig::default() };
    let o = run_search(data(), &cfg).unwrap();
    assert!(o.report.truncated);
    assert!(round_starts(&o.trace).len() < ROUNDS);
}

#[test]
fn every_proposal_has_exactly_one_outcome() {
    let o = outcome();
    let mut proposals = 0;
    for (i, t) in o.trace.iter().enumerate() {
        if let TraceRecord::Propose { algorithm, combination, .. } = t {
            proposals += 1;
            match o.trace.get(i + 1) {
                Some(TraceRecord::Eval { algorithm: a, combination: c, .. })
                | Some(TraceRecord::Skip { algorithm: a, combination: c, .. }) => {
                    assert_eq!((a, c), (algorithm, combination));
                }
                other => panic!("proposal {i} is followed by {other:?}"),
            }
        }
    }
    let outcomes = o.trace.iter().filter(|t| matches!(t, TraceRecord::Eval { .. } | TraceRecord::Skip { .. })).count();
    assert!(proposals > 0);
    assert_eq!(outcomes, proposals);
}

#[test]
fn survivors_shrink_but_not_below_the_floor() {
    let o = outcome();
    let n_a = survivors_at(&o.trace, 1).len();
    let mut prev = n_a;
    for round in 2..=ROUNDS {
        let now = survivors_at(&o.trace, round).len();
        assert!(now <= prev, "round {round}");
        assert!(now >= n_a.min(3), "round {round}");
        prev = now;
    }
}

#[test]
fn protected_algorithms_reach_round_three() {
    let o = outcome();
    for round in [2, 3] {
        let s = survivors_at(&o.trace, round);
        for id in ["random_forest", "linear_svm"] {
            assert!(s.iter().any(|a| a == id), "{id} missing at the start of round {round}");
        }
    }
}
