//! Round-robin comparison of cross-validated candidates.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contender {
    pub fold_errors: Vec<f64>,
    /// Error estimate from the last search round.
    pub prev_estimate: f64,
    /// Training plus validation cost over all folds.
    pub time: f64,
}

impl Contender {
    pub fn mean(&self) -> f64 {
        if self.fold_errors.is_empty() {
            return 1.0;
        }
        self.fold_errors.iter().sum::<f64>() / self.fold_errors.len() as f64
    }
}

/// Number of folds where `a` has strictly lower error than `b`, and vice versa.
pub fn fold_wins(a: &Contender, b: &Contender) -> (usize, usize) {
    a.fold_errors.iter().zip(&b.fold_errors).fold((0, 0), |(wa, wb), (x, y)| {
        if x < y {
            (wa + 1, wb)
        } else if y < x {
            (wa, wb + 1)
        } else {
            (wa, wb)
        }
    })
}

/// Pairwise wins of every contender: a pairing is won by taking more folds.
pub fn pairwise_wins(cs: &[Contender]) -> Vec<usize> {
    let mut wins = vec![0; cs.len()];
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            let (a, b) = fold_wins(&cs[i], &cs[j]);
            if a > b {
                wins[i] += 1;
            } else if b > a {
                wins[j] += 1;
            }
        }
    }
    wins
}

/// Index of the champion: most pairwise wins, then lowest mean fold error,
/// then lowest previous estimate, then least time, then earliest entry.
pub fn champion(cs: &[Contender]) -> Option<usize> {
    let wins = pairwise_wins(cs);
    (0..cs.len()).min_by(|&a, &b| {
        wins[b]
            .cmp(&wins[a])
            .then(cs[a].mean().total_cmp(&cs[b].mean()))
            .then(cs[a].prev_estimate.total_cmp(&cs[b].prev_estimate))
            .then(cs[a].time.total_cmp(&cs[b].time))
            .then(a.cmp(&b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(f: &[f64], prev: f64, time: f64) -> Contender {
        Contender { fold_errors: f.to_vec(), prev_estimate: prev, time }
    }

    #[test]
    fn fold_majority_beats_mean() {
        let a = c(&[0.1, 0.2, 0.3], 0.5, 1.0);
        let b = c(&[0.15, 0.15, 0.35], 0.5, 1.0);
        assert_eq!(fold_wins(&a, &b), (2, 1));
        assert_eq!(champion(&[b, a]), Some(1));
    }

    #[test]
    fn fastest_wins_full_tie() {
        let cs = [c(&[0.2; 3], 0.3, 5.0), c(&[0.2; 3], 0.3, 2.0), c(&[0.2; 3], 0.3, 9.0)];
        assert_eq!(champion(&cs), Some(1));
    }

    #[test]
    fn single_contender() {
        assert_eq!(champion(&[c(&[0.4], 0.4, 1.0)]), Some(0));
        assert_eq!(champion(&[]), None);
    }
}
