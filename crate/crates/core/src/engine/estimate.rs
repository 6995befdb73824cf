//! Retest selection, error-rate ratios, inverse-distance rough estimates and
//! surrogate penalties.

use super::schedule::normalize;

pub const RATIO_MIN: f64 = 0.25;
pub const RATIO_MAX: f64 = 2.5;

/// `E2 / E1` clipped to `[0.25, 2.5]`; 1.0 when `E1` is zero.
pub fn compute_ratio(e1: f64, e2: f64) -> f64 {
    if e1 <= 0.0 {
        return 1.0;
    }
    (e2 / e1).clamp(RATIO_MIN, RATIO_MAX)
}

/// Rough current-round estimate of a combination that was not retested.
///
/// `distances[i]` is the distance to the `i`-th retested combination (in
/// selection order) and `ratios[i]` its ratio. A previous error of 1.0 stays
/// at 1.0; with no retested combinations the ratio is 1.
pub fn rough_estimate_idw(e1: f64, distances: &[usize], ratios: &[f64], equal_weights: bool) -> f64 {
    if e1 >= 1.0 {
        return 1.0;
    }
    if ratios.is_empty() {
        return e1;
    }
    let r = if equal_weights {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    } else if let Some(j) = distances.iter().position(|&d| d == 0) {
        ratios[j]
    } else {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&d, &r) in distances.iter().zip(ratios) {
            let w = 1.0 / d as f64;
            num += w * r;
            den += w;
        }
        num / den
    };
    (e1 * r).min(1.0)
}

/// Picks up to `n_c` of the previous round's combinations for retesting.
///
/// Only errors below 1.0 are eligible. Greedy passes take the lowest-error
/// unmarked combination and mark every other one within `t_d` of it; when
/// fewer than `n_c` are picked the lowest-error marked ones fill the gap.
/// With `spread` off the `n_c` lowest errors are taken. Ties go to the lower
/// index. Returns indices into `errors` in selection order.
pub fn select_for_retest(
    errors: &[f64],
    distance: impl Fn(usize, usize) -> usize,
    n_c: usize,
    t_d: usize,
    spread: bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..errors.len()).filter(|&i| errors[i] < 1.0).collect();
    order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(a.cmp(&b)));
    if order.len() <= n_c || !spread {
        order.truncate(n_c);
        return order;
    }
    let mut selected = Vec::new();
    let mut marked = vec![false; errors.len()];
    let mut taken = vec![false; errors.len()];
    while selected.len() < n_c {
        let Some(&best) = order.iter().find(|&&i| !taken[i] && !marked[i]) else {
            break;
        };
        taken[best] = true;
        selected.push(best);
        for &i in &order {
            if !taken[i] && !marked[i] && distance(best, i) <= t_d {
                marked[i] = true;
            }
        }
    }
    for &i in &order {
        if selected.len() >= n_c {
            break;
        }
        if marked[i] && !taken[i] {
            taken[i] = true;
            selected.push(i);
        }
    }
    selected
}

/// Surrogate error: the raw error times the feature-selection factor (when
/// used) and `1 + rate · n_b` (for meta and ensemble algorithms), capped at 1.
pub fn apply_penalties(raw: f64, used_fs: Option<f64>, n_b: usize, rate: Option<f64>) -> f64 {
    let mut x = raw;
    let mut penalized = false;
    if let Some(f) = used_fs {
        x *= f;
        penalized = true;
    }
    if let (Some(rate), true) = (rate, n_b > 0) {
        x *= 1.0 + rate * n_b as f64;
        penalized = true;
    }
    if !penalized {
        return raw.min(1.0);
    }
    normalize(x).max(raw).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_clips() {
        assert_eq!(compute_ratio(0.4, 0.3), 0.3 / 0.4);
        assert_eq!(compute_ratio(0.1, 0.3), 2.5);
        assert_eq!(compute_ratio(0.5, 0.05), 0.25);
        assert_eq!(compute_ratio(0.0, 0.3), 1.0);
    }

    #[test]
    fn idw_examples() {
        let r = rough_estimate_idw(0.5, &[1, 2], &[0.8, 1.2], false);
        assert!((r - 0.5 * 1.4 / 1.5).abs() < 1e-15);
        assert_eq!(rough_estimate_idw(0.5, &[7], &[0.6], false), 0.5 * 0.6);
        assert_eq!(rough_estimate_idw(0.9, &[1], &[2.5], false), 1.0);
        assert_eq!(rough_estimate_idw(1.0, &[1], &[0.25], false), 1.0);
        assert_eq!(rough_estimate_idw(0.4, &[3, 0, 0], &[1.0, 0.5, 2.0], false), 0.2);
    }

    #[test]
    fn penalties() {
        assert_eq!(apply_penalties(0.20, Some(1.1), 0, Some(0.02)), 0.22);
        assert_eq!(apply_penalties(0.20, None, 1, Some(0.02)), 0.204);
        assert_eq!(apply_penalties(0.20, Some(1.1), 3, Some(0.02)), 0.2332);
        assert_eq!(apply_penalties(0.95, Some(1.1), 0, Some(0.02)), 1.0);
        assert_eq!(apply_penalties(0.20, None, 3, None), 0.20);
    }

    #[test]
    fn small_pools_are_taken_whole() {
        let e = [0.3, 0.1, 1.0, 0.2];
        assert_eq!(select_for_retest(&e, |_, _| 5, 10, 2, true), vec![1, 3, 0]);
    }

    #[test]
    fn clustered_pool_tops_up() {
        let e: Vec<f64> = (0..30).map(|i| i as f64 / 100.0).collect();
        let s = select_for_retest(&e, |_, _| 1, 10, 2, true);
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }
}
