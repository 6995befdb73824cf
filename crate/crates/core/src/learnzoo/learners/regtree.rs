//! Least-squares regression trees over dense numeric rows. Used for the
//! gradient-boosting learner and for the surrogate forest.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub struct RegTreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
    pub depth: usize,
}

/// A grown tree plus, for every leaf, its node id and member rows.
pub struct Grown {
    pub tree: RegTree,
    pub leaves: Vec<(usize, Vec<usize>)>,
    pub ops: u64,
}

impl RegTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn set_leaf(&mut self, node: usize, value: f64) {
        self.nodes[node] = RegNode::Leaf { value };
    }
}

/// Grows a tree on `rows` of the row-major matrix `x` (width `p`), with leaf
/// values equal to the mean target of their members.
pub fn fit(x: &[f64], p: usize, y: &[f64], rows: &[usize], params: &RegTreeParams, rng: &mut Rng) -> Grown {
    let mut nodes = vec![RegNode::Leaf { value: 0.0 }];
    let mut leaves = Vec::new();
    let mut ops = 0u64;
    let mut depth = 0;
    let mut cols: Vec<usize> = (0..p).collect();
    let mut stack = vec![(0usize, rows.to_vec(), 0usize)];
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    while let Some((id, idx, d)) = stack.pop() {
        depth = depth.max(d);
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| y[i]).sum();
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        let spread = idx.iter().any(|&i| (y[i] - mean).abs() > 1e-15);
        let can_split = spread && p > 0 && n >= 2 * params.min_leaf && params.max_depth.map_or(true, |m| d < m);
        let mut best: Option<(f64, usize, f64)> = None;
        if can_split {
            let m = params.max_features.unwrap_or(p).clamp(1, p);
            if m < p {
                cols.shuffle(rng);
            }
            let log_n = (usize::BITS - n.leading_zeros()) as u64;
            ops += n as u64 * m as u64 * log_n.max(1);
            let base = sum * sum / n as f64;
            for &j in &cols[..m] {
                pairs.clear();
                pairs.extend(idx.iter().map(|&i| (x[i * p + j], y[i])));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut sl = 0.0;
                for s in 0..n - 1 {
                    sl += pairs[s].1;
                    let nl = s + 1;
                    if nl < params.min_leaf || n - nl < params.min_leaf || pairs[s].0 == pairs[s + 1].0 {
                        continue;
                    }
                    let sr = sum - sl;
                    let gain = sl * sl / nl as f64 + sr * sr / (n - nl) as f64 - base;
                    if best.map_or(true, |b| gain > b.0) {
                        best = Some((gain, j, 0.5 * (pairs[s].0 + pairs[s + 1].0)));
                    }
                }
            }
        }
        match best {
            Some((gain, feature, threshold)) if gain > 1e-12 => {
                let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i * p + feature] <= threshold);
                let left = nodes.len();
                nodes.push(RegNode::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(RegNode::Leaf { value: 0.0 });
                nodes[id] = RegNode::Split { feature, threshold, left, right };
                stack.push((right, ri, d + 1));
                stack.push((left, li, d + 1));
            }
            _ => {
                nodes[id] = RegNode::Leaf { value: mean };
                ops += n as u64;
                leaves.push((id, idx));
            }
        }
    }
    Grown { tree: RegTree { nodes, depth }, leaves, ops }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn step_function_is_recovered() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 1.0 } else { 3.0 }).collect();
        let rows: Vec<usize> = (0..20).collect();
        let params = RegTreeParams { max_depth: None, min_leaf: 2, max_features: None };
        let g = fit(&x, 1, &y, &rows, &params, &mut rng::stream(0, &[]));
        assert_eq!(g.tree.predict(&[3.0]), 1.0);
        assert_eq!(g.tree.predict(&[15.0]), 3.0);
        assert_eq!(g.leaves.len(), 2);
    }
}
