//! Gradient boosting with softmax loss and SAMME AdaBoost over a base
//! learner. Both are anytime, one unit per boosting round.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::regtree::{self, RegTree, RegTreeParams};
use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::model::{fit_algorithm, Model};
use crate::learnzoo::params::Params;
use crate::learnzoo::table::{argmax, Table};
use crate::learnzoo::Fit;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbModel {
    init: Vec<f64>,
    learning_rate: f64,
    /// One tree per class per round.
    rounds: Vec<Vec<RegTree>>,
}

impl GbModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut f = self.init.clone();
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                f[k] += self.learning_rate * tree.predict(x);
            }
        }
        argmax(&f)
    }

    pub fn predict_ops(&self) -> u64 {
        self.rounds
            .iter()
            .flatten()
            .map(|t| t.depth as u64 + 1)
            .sum::<u64>()
            .max(1)
    }
}

fn softmax(f: &[f64]) -> Vec<f64> {
    let mx = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn train_gb(t: &Table, p: &Params, rng: &mut Rng, meter: &mut Meter) -> Result<Fit<GbModel>, Abort> {
    meter.check()?;
    let n_rounds = p.int("rounds")?.max(1);
    let lr = p.num("learning_rate")?;
    let params = RegTreeParams {
        max_depth: Some(p.int("max_depth")?.max(1)),
        min_leaf: 1,
        max_features: None,
    };
    let subsample = p.num("subsample")?;
    let k = t.n_classes;
    let n = t.n();
    let counts = t.class_counts();
    let init: Vec<f64> = counts
        .iter()
        .map(|&c| ((c as f64 + 1.0) / (n as f64 + k as f64)).ln())
        .collect();
    let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
    let mut rounds = Vec::new();
    let kf = k as f64;
    for _ in 0..n_rounds {
        if meter.exhausted() {
            break;
        }
        let probs: Vec<Vec<f64>> = f.iter().map(|fi| softmax(fi)).collect();
        let rows: Vec<usize> = if subsample < 1.0 {
            let r: Vec<usize> = (0..n).filter(|_| rng.gen::<f64>() < subsample).collect();
            if r.is_empty() {
                vec![rng.gen_range(0..n)]
            } else {
                r
            }
        } else {
            (0..n).collect()
        };
        let mut trees = Vec::with_capacity(k);
        for c in 0..k {
            let resid: Vec<f64> = (0..n)
                .map(|i| f64::from(u8::from(t.y[i] == c)) - probs[i][c])
                .collect();
            let mut g = regtree::fit(&t.x, t.p, &resid, &rows, &params, rng);
            for (node, members) in &g.leaves {
                let num: f64 = members.iter().map(|&i| resid[i]).sum();
                let den: f64 = members.iter().map(|&i| resid[i].abs() * (1.0 - resid[i].abs())).sum();
                let gamma = if den > 1e-12 { (kf - 1.0) / kf * num / den } else { 0.0 };
                g.tree.set_leaf(*node, gamma.clamp(-10.0, 10.0));
            }
            meter.charge(g.ops);
            trees.push(g.tree);
        }
        for (i, fi) in f.iter_mut().enumerate() {
            for (c, tree) in trees.iter().enumerate() {
                fi[c] += lr * tree.predict(t.row(i));
            }
        }
        meter.charge((n * k) as u64);
        rounds.push(trees);
    }
    if rounds.is_empty() {
        return Err(Abort::Budget);
    }
    let partial = rounds.len() < n_rounds;
    Ok(Fit {
        model: GbModel { init, learning_rate: lr, rounds },
        partial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaModel {
    members: Vec<(Model, f64)>,
    n_classes: usize,
}

impl AdaModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut score = vec![0.0; self.n_classes];
        for (m, alpha) in &self.members {
            score[m.predict(x)] += alpha;
        }
        argmax(&score)
    }

    pub fn predict_ops(&self) -> u64 {
        self.members.iter().map(|(m, _)| m.predict_ops()).sum::<u64>().max(1)
    }
}

fn weighted_sample(weights: &[f64], n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cum.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

/// SAMME with weighted resampling. The base learner's parameters live under
/// the `<base>.` prefix of the combination.
pub fn train_ada(
    t: &Table,
    values: &std::collections::BTreeMap<String, crate::hyperspace::Value>,
    prefix: &str,
    rng: &mut Rng,
    meter: &mut Meter,
) -> Result<Fit<AdaModel>, Abort> {
    meter.check()?;
    let p = Params::nested(values, prefix);
    let iterations = p.int("iterations")?.max(1);
    let base = p.cat("base")?.to_string();
    let inner = format!("{prefix}{base}.");
    let n = t.n();
    let k = t.n_classes as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut members: Vec<(Model, f64)> = Vec::new();
    let mut stopped_by_budget = false;
    for _ in 0..iterations {
        if meter.exhausted() {
            stopped_by_budget = true;
            break;
        }
        let idx = weighted_sample(&w, n, rng);
        let sample = t.take(&idx);
        let fit = match fit_algorithm(&base, &sample, values, &inner, rng, meter) {
            Ok(f) => f,
            Err(Abort::Budget) => {
                stopped_by_budget = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let model = fit.model;
        let miss: Vec<bool> = (0..n).map(|i| model.predict(t.row(i)) != t.y[i]).collect();
        meter.charge(n as u64 * model.predict_ops());
        let total: f64 = w.iter().sum();
        let err: f64 = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(w, _)| w).sum::<f64>() / total;
        if err >= 1.0 - 1.0 / k {
            if members.is_empty() {
                members.push((model, 1.0));
            }
            break;
        }
        if err <= 1e-10 {
            members.push((model, 10.0 + (k - 1.0).ln()));
            break;
        }
        let alpha = ((1.0 - err) / err).ln() + (k - 1.0).ln();
        for (wi, &m) in w.iter_mut().zip(&miss) {
            if m {
                *wi *= alpha.exp();
            }
        }
        let s: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= s;
        }
        members.push((model, alpha));
        if fit.partial {
            stopped_by_budget = true;
            break;
        }
    }
    if members.is_empty() {
        return Err(Abort::Budget);
    }
    Ok(Fit {
        model: AdaModel { members, n_classes: t.n_classes },
        partial: stopped_by_budget,
    })
}
