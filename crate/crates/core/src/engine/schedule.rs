//! Per-round constants: threshold, budgets, cycle counts, sample fractions.

use serde::{Deserialize, Serialize};

use crate::config::SearchConfig;
use crate::dataset::{SizeClass, ROUND_FRACTIONS};

pub const ROUNDS: usize = 5;

/// Rounds `x` to 12 decimal places, which removes binary noise from
/// products of decimal constants (0.2 × 1.1 is exactly 0.22 afterwards).
pub fn normalize(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scaled = (x * 1e12).round();
    if scaled.abs() < 9.0e15 {
        scaled / 1e12
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSchedule {
    pub round: usize,
    /// Unpromising threshold; absent in the final round.
    pub tau: Option<f64>,
    pub fs_budget: f64,
    pub train_budget: f64,
    /// Optimization cycles; absent in rounds 1 and 5.
    pub cycles: Option<usize>,
    /// Share of the largest training set; absent in the final round.
    pub fraction: Option<f64>,
    /// Share of the round's algorithms kept; absent in the final round.
    pub keep: Option<f64>,
}

/// The schedule for all five rounds.
pub fn schedule(cfg: &SearchConfig, size: SizeClass) -> Vec<RoundSchedule> {
    let mut tau = cfg.tau;
    let mut budget = if size.is_large() { cfg.budget_large } else { cfg.budget_small };
    (1..=ROUNDS)
        .map(|round| {
            let last = round == ROUNDS;
            let (fs_budget, train_budget) = if cfg.technique(3) {
                (budget, budget)
            } else {
                (cfg.fixed_fs_budget, cfg.fixed_train_budget)
            };
            let s = RoundSchedule {
                round,
                tau: (!last).then_some(tau),
                fs_budget,
                train_budget,
                cycles: (2..ROUNDS).contains(&round).then(|| cfg.cycles.saturating_sub(round - 2).max(1)),
                fraction: (!last).then(|| ROUND_FRACTIONS[round - 1]),
                keep: (!last).then_some(if round == 1 { cfg.keep_first } else { cfg.keep_later }),
            };
            tau = normalize(tau * cfg.tau_decay);
            budget = normalize(budget * cfg.budget_growth);
            s
        })
        .collect()
}

/// Number of algorithms a keep fraction allows out of `n`.
pub fn keep_count(keep: f64, n: usize) -> usize {
    normalize(keep * n as f64).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_small_schedule() {
        let s = schedule(&SearchConfig::default(), SizeClass::from_dims(100, 10));
        let taus: Vec<Option<f64>> = s.iter().map(|r| r.tau).collect();
        assert_eq!(taus, [Some(0.5), Some(0.4), Some(0.32), Some(0.256), None]);
        let budgets: Vec<f64> = s.iter().map(|r| r.train_budget).collect();
        assert_eq!(budgets, [10.0, 15.0, 22.5, 33.75, 50.625]);
        let cycles: Vec<Option<usize>> = s.iter().map(|r| r.cycles).collect();
        assert_eq!(cycles, [None, Some(3), Some(2), Some(1), None]);
        let keep: Vec<Option<f64>> = s.iter().map(|r| r.keep).collect();
        assert_eq!(keep, [Some(0.4), Some(0.7), Some(0.7), Some(0.7), None]);
    }

    #[test]
    fn large_and_fixed_budgets() {
        let s = schedule(&SearchConfig::default(), SizeClass::from_dims(5001, 200));
        assert_eq!(s[0].fs_budget, 20.0);
        assert_eq!(s[1].fs_budget, 30.0);
        let cfg = SearchConfig { technique_off: vec![3], ..SearchConfig::default() };
        let s = schedule(&cfg, SizeClass::from_dims(100, 10));
        assert!(s.iter().all(|r| r.fs_budget == 900.0 && r.train_budget == 9000.0));
    }

    #[test]
    fn keep_counts() {
        assert_eq!(keep_count(0.4, 10), 4);
        assert_eq!(keep_count(0.7, 10), 7);
        assert_eq!(keep_count(0.7, 4), 3);
        assert_eq!(keep_count(0.4, 1), 1);
    }
}
