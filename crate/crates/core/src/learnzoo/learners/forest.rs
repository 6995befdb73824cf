use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{self, Criterion, TreeModel, TreeParams};
use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::params::Params;
use crate::learnzoo::table::{argmax_usize, Table};
use crate::learnzoo::Fit;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub n_classes: usize,
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        argmax_usize(&votes)
    }

    pub fn predict_ops(&self) -> u64 {
        self.trees.iter().map(TreeModel::predict_ops).sum()
    }
}

pub fn max_features(rule: &str, p: usize) -> usize {
    let m = match rule {
        "sqrt" => (p as f64).sqrt().round() as usize,
        "log2" => (p as f64).log2().round() as usize + 1,
        "half" => p.div_ceil(2),
        _ => p,
    };
    m.clamp(1, p.max(1))
}

/// Anytime: one unit is one tree. Trees completed before the budget runs out
/// form the (partial) model.
pub fn train(t: &Table, p: &Params, rng: &mut Rng, meter: &mut Meter) -> Result<Fit<ForestModel>, Abort> {
    let n_trees = p.int("trees")?.max(1);
    let params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: if p.flag("depth_limited")? { p.opt_int("max_depth") } else { None },
        min_leaf: p.int("min_leaf")?.max(1),
        max_features: Some(max_features(p.cat("max_features")?, t.p)),
    };
    let n = t.n();
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        if meter.exhausted() {
            break;
        }
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        trees.push(tree::grow(t, &rows, &params, rng, meter, false)?);
    }
    if trees.is_empty() {
        return Err(Abort::Budget);
    }
    let partial = trees.len() < n_trees;
    Ok(Fit {
        model: ForestModel { trees, n_classes: t.n_classes },
        partial,
    })
}
