//! CART classification trees: threshold splits on numeric columns,
//! one-level-versus-rest splits on categorical columns.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::params::Params;
use crate::learnzoo::table::{argmax_usize, ColKind, Table};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Columns examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl TreeParams {
    pub fn from_params(p: &Params) -> Result<TreeParams, Abort> {
        let criterion = match p.cat("criterion")? {
            "entropy" => Criterion::Entropy,
            _ => Criterion::Gini,
        };
        let max_depth = if p.flag("depth_limited")? { p.opt_int("max_depth") } else { None };
        Ok(TreeParams {
            criterion,
            max_depth,
            min_leaf: p.int("min_leaf")?.max(1),
            max_features: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Test {
    /// Go left when the value is at most the threshold.
    Le(f64),
    /// Go left when the value equals the level index.
    Eq(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, test: Test, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub depth: usize,
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, test, left, right } => {
                    let v = x[*feature];
                    let go_left = match test {
                        Test::Le(t) => v <= *t,
                        Test::Eq(l) => v == *l,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_ops(&self) -> u64 {
        self.depth as u64 + 1
    }
}

fn impurity(counts: &[usize], total: usize, c: Criterion) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    match c {
        Criterion::Gini => 1.0 - counts.iter().map(|&k| (k as f64 / n).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&k| k > 0)
            .map(|&k| {
                let q = k as f64 / n;
                q * q.ln()
            })
            .sum::<f64>(),
    }
}

struct Best {
    gain: f64,
    feature: usize,
    test: Test,
}

/// Grows a tree on `rows` (indices into `t`, repeats allowed).
///
/// With `abortable`, the meter is checked before every node and the whole
/// tree is abandoned once the budget runs out; otherwise the cost is only
/// charged.
pub fn grow(
    t: &Table,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut Rng,
    meter: &mut Meter,
    abortable: bool,
) -> Result<TreeModel, Abort> {
    let mut nodes = Vec::new();
    let mut depth = 0;
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    nodes.push(Node::Leaf { class: 0 });
    stack.push((0, rows.to_vec(), 0));
    let mut cols: Vec<usize> = (0..t.p).collect();
    let k = t.n_classes;
    while let Some((id, idx, d)) = stack.pop() {
        if abortable {
            meter.check()?;
        }
        depth = depth.max(d);
        let mut counts = vec![0usize; k];
        for &i in &idx {
            counts[t.y[i]] += 1;
        }
        let class = argmax_usize(&counts);
        let n = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = params.max_depth.map_or(true, |m| d < m);
        if pure || !depth_ok || n < 2 * params.min_leaf || t.p == 0 {
            nodes[id] = Node::Leaf { class };
            meter.charge(n as u64);
            continue;
        }
        let m = params.max_features.unwrap_or(t.p).clamp(1, t.p);
        if m < t.p {
            cols.shuffle(rng);
        }
        let parent = impurity(&counts, n, params.criterion);
        let mut best: Option<Best> = None;
        let log_n = (usize::BITS - n.leading_zeros()) as u64;
        meter.charge(n as u64 * m as u64 * log_n.max(1));
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        for &j in &cols[..m] {
            match t.kinds[j] {
                ColKind::Numeric => {
                    pairs.clear();
                    pairs.extend(idx.iter().map(|&i| (t.at(i, j), t.y[i])));
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut left = vec![0usize; k];
                    let mut right = counts.clone();
                    for s in 0..n - 1 {
                        let c = pairs[s].1;
                        left[c] += 1;
                        right[c] -= 1;
                        let nl = s + 1;
                        if nl < params.min_leaf || n - nl < params.min_leaf {
                            continue;
                        }
                        if pairs[s].0 == pairs[s + 1].0 {
                            continue;
                        }
                        let w = (nl as f64 * impurity(&left, nl, params.criterion)
                            + (n - nl) as f64 * impurity(&right, n - nl, params.criterion))
                            / n as f64;
                        let gain = parent - w;
                        if best.as_ref().map_or(true, |b| gain > b.gain) {
                            let thr = 0.5 * (pairs[s].0 + pairs[s + 1].0);
                            best = Some(Best { gain, feature: j, test: Test::Le(thr) });
                        }
                    }
                }
                ColKind::Categorical { levels } => {
                    let mut per = vec![vec![0usize; k]; levels.max(1)];
                    for &i in &idx {
                        let l = (t.at(i, j) as usize).min(levels.saturating_sub(1));
                        per[l][t.y[i]] += 1;
                    }
                    for (l, left) in per.iter().enumerate() {
                        let nl: usize = left.iter().sum();
                        if nl < params.min_leaf || n - nl < params.min_leaf || nl == 0 || nl == n {
                            continue;
                        }
                        let right: Vec<usize> = counts.iter().zip(left).map(|(a, b)| a - b).collect();
                        let w = (nl as f64 * impurity(left, nl, params.criterion)
                            + (n - nl) as f64 * impurity(&right, n - nl, params.criterion))
                            / n as f64;
                        let gain = parent - w;
                        if best.as_ref().map_or(true, |b| gain > b.gain) {
                            best = Some(Best { gain, feature: j, test: Test::Eq(l as f64) });
                        }
                    }
                }
            }
        }
        match best {
            Some(b) if b.gain > 1e-12 => {
                let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
                    let v = t.at(i, b.feature);
                    match b.test {
                        Test::Le(th) => v <= th,
                        Test::Eq(l) => v == l,
                    }
                });
                let left = nodes.len();
                nodes.push(Node::Leaf { class });
                let right = nodes.len();
                nodes.push(Node::Leaf { class });
                nodes[id] = Node::Split { feature: b.feature, test: b.test, left, right };
                stack.push((right, ri, d + 1));
                stack.push((left, li, d + 1));
            }
            _ => nodes[id] = Node::Leaf { class },
        }
    }
    Ok(TreeModel { nodes, depth })
}

pub fn train(t: &Table, p: &Params, rng: &mut Rng, meter: &mut Meter) -> Result<TreeModel, Abort> {
    meter.check()?;
    let params = TreeParams::from_params(p)?;
    let rows: Vec<usize> = (0..t.n()).collect();
    grow(t, &rows, &params, rng, meter, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learnzoo::meter::Clock;
    use crate::rng;

    fn xor_table() -> Table {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 2) as f64;
            let b = ((i / 2) % 2) as f64;
            x.extend([a + 0.01 * i as f64, b]);
            y.push(((a as usize) ^ (b as usize)) as usize);
        }
        Table {
            x,
            p: 2,
            y,
            kinds: vec![ColKind::Numeric, ColKind::Categorical { levels: 2 }],
            n_classes: 2,
        }
    }

    fn params(depth: Option<usize>) -> TreeParams {
        TreeParams { criterion: Criterion::Gini, max_depth: depth, min_leaf: 1, max_features: None }
    }

    #[test]
    fn memorizes_noise_free_data() {
        let t = xor_table();
        let rows: Vec<usize> = (0..t.n()).collect();
        let mut m = Clock::default().unlimited();
        let tree = grow(&t, &rows, &params(None), &mut rng::stream(0, &[]), &mut m, true).unwrap();
        assert!((0..t.n()).all(|i| tree.predict(t.row(i)) == t.y[i]));
    }

    #[test]
    fn depth_limit_holds() {
        let t = xor_table();
        let rows: Vec<usize> = (0..t.n()).collect();
        let mut m = Clock::default().unlimited();
        let tree = grow(&t, &rows, &params(Some(1)), &mut rng::stream(0, &[]), &mut m, true).unwrap();
        assert!(tree.depth <= 1);
    }

    #[test]
    fn aborts_on_exhausted_budget() {
        let t = xor_table();
        let rows: Vec<usize> = (0..t.n()).collect();
        let mut m = Clock::virtual_clock(1.0).meter(0.0);
        assert_eq!(
            grow(&t, &rows, &params(None), &mut rng::stream(0, &[]), &mut m, true),
            Err(Abort::Budget)
        );
    }
}
