use serde::{Deserialize, Serialize};

use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::params::Params;
use crate::learnzoo::table::{argmax, ColKind, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnModel {
    /// Per-class log-probabilities of each level, or of each bin when the
    /// column was discretized at `cuts`.
    Counts { cuts: Option<Vec<f64>>, log_p: Vec<Vec<f64>> },
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    /// Per-class sample values with a per-class bandwidth.
    Kernel { values: Vec<Vec<f64>>, bandwidth: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    log_prior: Vec<f64>,
    columns: Vec<ColumnModel>,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn bin_of(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}

impl BayesModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut score = self.log_prior.clone();
        for (j, col) in self.columns.iter().enumerate() {
            let v = x[j];
            for (c, s) in score.iter_mut().enumerate() {
                *s += match col {
                    ColumnModel::Counts { cuts, log_p } => {
                        let b = cuts.as_ref().map_or(v as usize, |c| bin_of(c, v));
                        log_p[c].get(b).copied().unwrap_or(log_p[c][0])
                    }
                    ColumnModel::Gaussian { mean, var } => {
                        -LN_SQRT_2PI - 0.5 * var[c].ln() - (v - mean[c]).powi(2) / (2.0 * var[c])
                    }
                    ColumnModel::Kernel { values, bandwidth } => {
                        let h = bandwidth[c];
                        let vals = &values[c];
                        if vals.is_empty() {
                            -1e3
                        } else {
                            let dens: f64 = vals.iter().map(|&u| (-0.5 * ((v - u) / h).powi(2)).exp()).sum::<f64>()
                                / (vals.len() as f64 * h);
                            (dens.max(1e-300)).ln() - LN_SQRT_2PI
                        }
                    }
                };
            }
        }
        argmax(&score)
    }

    pub fn predict_ops(&self) -> u64 {
        let k = self.log_prior.len() as u64;
        self.columns
            .iter()
            .map(|c| match c {
                ColumnModel::Kernel { values, .. } => values.iter().map(|v| v.len() as u64).sum::<u64>(),
                _ => k,
            })
            .sum::<u64>()
            .max(1)
    }
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            q * q.log2()
        })
        .sum::<f64>()
}

/// Recursive minimum-description-length discretization: accept the best
/// boundary cut while its information gain pays for encoding it.
pub fn mdl_cuts(pairs: &mut [(f64, usize)], n_classes: usize) -> Vec<f64> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cuts = Vec::new();
    split_mdl(pairs, n_classes, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn split_mdl(pairs: &[(f64, usize)], k: usize, cuts: &mut Vec<f64>) {
    let n = pairs.len();
    if n < 2 {
        return;
    }
    let mut total = vec![0usize; k];
    for &(_, y) in pairs {
        total[y] += 1;
    }
    let ent = entropy(&total);
    if ent == 0.0 {
        return;
    }
    let mut left = vec![0usize; k];
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for s in 0..n - 1 {
        left[pairs[s].1] += 1;
        if pairs[s].0 == pairs[s + 1].0 {
            continue;
        }
        let right: Vec<usize> = total.iter().zip(&left).map(|(a, b)| a - b).collect();
        let nl = (s + 1) as f64;
        let w = (nl * entropy(&left) + (n as f64 - nl) * entropy(&right)) / n as f64;
        if best.as_ref().map_or(true, |b| w < b.0) {
            best = Some((w, s, left.clone()));
        }
    }
    let Some((w, s, left)) = best else {
        return;
    };
    let right: Vec<usize> = total.iter().zip(&left).map(|(a, b)| a - b).collect();
    let kinds = |c: &[usize]| c.iter().filter(|&&x| x > 0).count() as f64;
    let (k0, k1, k2) = (kinds(&total), kinds(&left), kinds(&right));
    let gain = ent - w;
    let delta = (3f64.powf(k0) - 2.0).log2() - (k0 * ent - k1 * entropy(&left) - k2 * entropy(&right));
    let nf = n as f64;
    if gain <= ((nf - 1.0).log2() + delta) / nf {
        return;
    }
    cuts.push(0.5 * (pairs[s].0 + pairs[s + 1].0));
    split_mdl(&pairs[..=s], k, cuts);
    split_mdl(&pairs[s + 1..], k, cuts);
}

fn laplace(counts: &[Vec<usize>], bins: usize) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .map(|&c| ((c as f64 + 1.0) / (total as f64 + bins as f64)).ln())
                .collect()
        })
        .collect()
}

/// Not anytime; the meter is checked after every column.
pub fn train(t: &Table, p: &Params, meter: &mut Meter) -> Result<BayesModel, Abort> {
    meter.check()?;
    let kernel = p.flag("kernel_density")?;
    let discretize = p.flag("supervised_discretization")?;
    if kernel && discretize {
        return Err(Abort::Failure(
            "naive Bayes cannot use kernel density and supervised discretization together".into(),
        ));
    }
    let k = t.n_classes;
    let n = t.n();
    let class_counts = t.class_counts();
    let log_prior: Vec<f64> = class_counts
        .iter()
        .map(|&c| ((c as f64 + 1.0) / (n as f64 + k as f64)).ln())
        .collect();
    let mut columns = Vec::with_capacity(t.p);
    let mut max_var: f64 = 0.0;
    for j in 0..t.p {
        if t.kinds[j] == ColKind::Numeric {
            let m = (0..n).map(|i| t.at(i, j)).sum::<f64>() / n.max(1) as f64;
            let v = (0..n).map(|i| (t.at(i, j) - m).powi(2)).sum::<f64>() / n.max(1) as f64;
            max_var = max_var.max(v);
        }
    }
    let eps = (1e-9 * max_var).max(1e-12);
    for j in 0..t.p {
        let col = match t.kinds[j] {
            ColKind::Categorical { levels } => {
                let mut counts = vec![vec![0usize; levels.max(1)]; k];
                for i in 0..n {
                    let l = (t.at(i, j) as usize).min(levels.saturating_sub(1));
                    counts[t.y[i]][l] += 1;
                }
                meter.charge(n as u64);
                ColumnModel::Counts { cuts: None, log_p: laplace(&counts, levels.max(1)) }
            }
            ColKind::Numeric if discretize => {
                let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (t.at(i, j), t.y[i])).collect();
                let cuts = mdl_cuts(&mut pairs, k);
                let bins = cuts.len() + 1;
                let mut counts = vec![vec![0usize; bins]; k];
                for i in 0..n {
                    counts[t.y[i]][bin_of(&cuts, t.at(i, j))] += 1;
                }
                let log_n = (usize::BITS - n.leading_zeros()) as u64;
                meter.charge(n as u64 * log_n * (bins as u64 + 1));
                ColumnModel::Counts { cuts: Some(cuts), log_p: laplace(&counts, bins) }
            }
            ColKind::Numeric if kernel => {
                let mut values = vec![Vec::new(); k];
                for i in 0..n {
                    values[t.y[i]].push(t.at(i, j));
                }
                let bandwidth = values
                    .iter()
                    .map(|v| {
                        let m = v.len().max(1) as f64;
                        let mean = v.iter().sum::<f64>() / m;
                        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt();
                        (1.06 * sd * m.powf(-0.2)).max(eps.sqrt())
                    })
                    .collect();
                meter.charge(n as u64);
                ColumnModel::Kernel { values, bandwidth }
            }
            ColKind::Numeric => {
                let mut sum = vec![0.0; k];
                let mut sq = vec![0.0; k];
                for i in 0..n {
                    let v = t.at(i, j);
                    sum[t.y[i]] += v;
                    sq[t.y[i]] += v * v;
                }
                let mut mean = vec![0.0; k];
                let mut var = vec![1.0; k];
                for c in 0..k {
                    let m = class_counts[c] as f64;
                    if m > 0.0 {
                        mean[c] = sum[c] / m;
                        var[c] = (sq[c] / m - mean[c] * mean[c]).max(0.0) + eps;
                    }
                }
                meter.charge(n as u64);
                ColumnModel::Gaussian { mean, var }
            }
        };
        columns.push(col);
        meter.check()?;
    }
    Ok(BayesModel { log_prior, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mdl_finds_clean_boundary() {
        let mut pairs: Vec<(f64, usize)> = (0..40).map(|i| (i as f64, usize::from(i >= 20))).collect();
        assert_eq!(mdl_cuts(&mut pairs, 2), vec![19.5]);
    }

    #[test]
    fn mdl_rejects_noise() {
        let mut pairs: Vec<(f64, usize)> = (0..8).map(|i| (i as f64, i % 2)).collect();
        assert!(mdl_cuts(&mut pairs, 2).is_empty());
    }
}
