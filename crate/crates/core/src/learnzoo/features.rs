//! Feature selection: a search method paired with a feature evaluator.
//!
//! Attribute evaluators score each feature in [0, 1] and pair with the
//! ranker. The subset evaluator (correlation-based merit) pairs with the
//! greedy-forward and best-first searches. Mismatched pairs fail.

use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::meter::{Abort, Meter};
use super::table::{ColKind, Table};
use crate::dataset::round_half_up;
use crate::hyperspace::{FsBlock, HyperParam, HyperSpace, Scale};

/// Bins used when the subset evaluator discretizes numeric columns.
const CFS_BINS: usize = 10;
const POWER_ITERATIONS: usize = 60;

pub const SEARCHES: [&str; 3] = ["ranker", "greedy_forward", "best_first"];
pub const EVALUATORS: [&str; 5] = ["info_gain", "chi_square", "correlation", "principal_components", "cfs"];
/// Numeric parameters of the search methods; the cache indexes these.
pub const SEARCH_NUMERIC: [&str; 4] = [
    "fs.ranker.fraction",
    "fs.ranker.threshold",
    "fs.greedy.max_fraction",
    "fs.best_first.stale_limit",
];

/// The feature-selection block shared by every learner except the baseline.
pub fn fs_space() -> HyperSpace {
    HyperSpace::new(vec![
        HyperParam::categorical("fs.use", &["false", "true"], "false"),
        HyperParam::categorical("fs.search", &SEARCHES, "ranker").when("fs.use", &["true"]),
        HyperParam::categorical("fs.evaluator", &EVALUATORS, "info_gain").when("fs.use", &["true"]),
        HyperParam::categorical("fs.ranker.mode", &["top_fraction", "threshold"], "top_fraction")
            .when("fs.search", &["ranker"]),
        HyperParam::numeric("fs.ranker.fraction", 0.05, 1.0, Scale::Linear, false, 0.5)
            .when("fs.ranker.mode", &["top_fraction"]),
        HyperParam::numeric("fs.ranker.threshold", 0.0, 0.5, Scale::Linear, false, 0.1)
            .when("fs.ranker.mode", &["threshold"]),
        HyperParam::numeric("fs.greedy.max_fraction", 0.1, 1.0, Scale::Linear, false, 0.5)
            .when("fs.search", &["greedy_forward"]),
        HyperParam::numeric("fs.best_first.stale_limit", 2.0, 10.0, Scale::Linear, true, 5.0)
            .when("fs.search", &["best_first"]),
        HyperParam::categorical("fs.best_first.direction", &["forward", "backward"], "forward")
            .when("fs.search", &["best_first"]),
        HyperParam::numeric("fs.bins", 2.0, 20.0, Scale::Linear, true, 10.0)
            .when("fs.evaluator", &["info_gain", "chi_square"]),
        HyperParam::numeric("fs.pca.components", 1.0, 10.0, Scale::Linear, true, 3.0)
            .when("fs.evaluator", &["principal_components"]),
    ])
    .expect("feature-selection space is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "features", rename_all = "lowercase")]
pub enum FsStatus {
    Selected(Vec<usize>),
    All,
    None,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsOutcome {
    pub status: FsStatus,
    /// Cost units spent.
    pub elapsed: f64,
    /// Set when the technique failed; the failure is reported as a timeout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Runs the technique on `t` under `meter`'s budget.
pub fn run_feature_selection(block: &FsBlock, t: &Table, meter: &mut Meter) -> FsOutcome {
    let result = select(block, t, meter);
    let elapsed = meter.spent();
    match result {
        Ok(mut s) => {
            s.sort_unstable();
            s.dedup();
            let status = if s.is_empty() {
                FsStatus::None
            } else if s.len() == t.p {
                FsStatus::All
            } else {
                FsStatus::Selected(s)
            };
            FsOutcome { status, elapsed, diagnostic: None }
        }
        Err(Abort::Budget) => FsOutcome { status: FsStatus::Timeout, elapsed, diagnostic: None },
        Err(Abort::Failure(m)) => FsOutcome {
            status: FsStatus::Timeout,
            elapsed,
            diagnostic: Some(m),
        },
    }
}

fn select(block: &FsBlock, t: &Table, meter: &mut Meter) -> Result<Vec<usize>, Abort> {
    meter.check()?;
    let evaluator = block.evaluator();
    let search = block.search();
    if !EVALUATORS.contains(&evaluator) || !SEARCHES.contains(&search) {
        return Err(Abort::Failure(format!("unknown technique {search}/{evaluator}")));
    }
    match (search, evaluator) {
        ("ranker", "cfs") => Err(Abort::Failure("the ranker needs an attribute evaluator".into())),
        ("ranker", _) => {
            let scores = attribute_scores(evaluator, block, t, meter)?;
            Ok(rank(&scores, block))
        }
        (_, "cfs") => {
            let su = Merit::new(t, meter)?;
            if search == "greedy_forward" {
                let frac = block.num("fs.greedy.max_fraction").unwrap_or(1.0);
                let cap = ((frac * t.p as f64).ceil() as usize).clamp(1, t.p.max(1));
                greedy_forward(&su, cap, meter)
            } else {
                let stale = block.num("fs.best_first.stale_limit").unwrap_or(5.0) as usize;
                let backward = block.cat("fs.best_first.direction") == Some("backward");
                best_first(&su, stale.max(1), backward, meter)
            }
        }
        _ => Err(Abort::Failure(format!("{search} needs a subset evaluator"))),
    }
}

fn rank(scores: &[f64], block: &FsBlock) -> Vec<usize> {
    if block.cat("fs.ranker.mode") == Some("threshold") {
        let th = block.num("fs.ranker.threshold").unwrap_or(0.0);
        return (0..scores.len()).filter(|&j| scores[j] > th).collect();
    }
    let frac = block.num("fs.ranker.fraction").unwrap_or(1.0);
    let keep = round_half_up(frac * scores.len() as f64).min(scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(keep);
    order
}

/// Level index of every row in column `j`: categorical levels as stored,
/// numeric values by equal-frequency bins.
pub fn discretize(t: &Table, j: usize, bins: usize) -> (Vec<usize>, usize) {
    match t.kinds[j] {
        ColKind::Categorical { levels } => {
            let l = levels.max(1);
            ((0..t.n()).map(|i| (t.at(i, j) as usize).min(l - 1)).collect(), l)
        }
        ColKind::Numeric if t.n() == 0 => (Vec::new(), 1),
        ColKind::Numeric => {
            let mut v: Vec<f64> = (0..t.n()).map(|i| t.at(i, j)).collect();
            v.sort_by(f64::total_cmp);
            let mut cuts: Vec<f64> = (1..bins)
                .map(|b| v[(b * v.len() / bins).min(v.len().saturating_sub(1))])
                .collect();
            cuts.dedup();
            let codes = (0..t.n())
                .map(|i| cuts.partition_point(|&c| c <= t.at(i, j)))
                .collect();
            (codes, cuts.len() + 1)
        }
    }
}

fn contingency(a: &[usize], la: usize, b: &[usize], lb: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; lb]; la];
    for (&x, &y) in a.iter().zip(b) {
        m[x][y] += 1.0;
    }
    m
}

fn entropy_of(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let q = c / n;
            -q * q.ln()
        })
        .sum()
}

/// Mutual information and the two marginal entropies (nats).
fn information(m: &[Vec<f64>]) -> (f64, f64, f64) {
    let n: f64 = m.iter().flatten().sum();
    if n == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let hx = entropy_of(m.iter().map(|r| r.iter().sum()), n);
    let cols = m.first().map_or(0, Vec::len);
    let hy = entropy_of((0..cols).map(|c| m.iter().map(|r| r[c]).sum()), n);
    let hxy = entropy_of(m.iter().flatten().copied(), n);
    (hx + hy - hxy, hx, hy)
}

pub fn info_gain_ratio(m: &[Vec<f64>]) -> f64 {
    let (mi, _, hy) = information(m);
    if hy > 0.0 {
        (mi / hy).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn symmetric_uncertainty(m: &[Vec<f64>]) -> f64 {
    let (mi, hx, hy) = information(m);
    if hx + hy > 0.0 {
        (2.0 * mi / (hx + hy)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn cramers_v(m: &[Vec<f64>]) -> f64 {
    let n: f64 = m.iter().flatten().sum();
    let rows: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let cols_n = m.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..cols_n).map(|c| m.iter().map(|r| r[c]).sum()).collect();
    let r = rows.iter().filter(|&&x| x > 0.0).count();
    let c = cols.iter().filter(|&&x| x > 0.0).count();
    if n == 0.0 || r < 2 || c < 2 {
        return 0.0;
    }
    let mut chi = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                chi += (o - e) * (o - e) / e;
            }
        }
    }
    (chi / (n * (r.min(c) - 1) as f64)).sqrt().clamp(0.0, 1.0)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Per-feature scores in [0, 1] from an attribute evaluator.
pub fn attribute_scores(evaluator: &str, block: &FsBlock, t: &Table, meter: &mut Meter) -> Result<Vec<f64>, Abort> {
    let n = t.n();
    let k = t.n_classes;
    let log_n = (usize::BITS - n.leading_zeros()) as u64;
    match evaluator {
        "principal_components" => {
            let comps = block.num("fs.pca.components").unwrap_or(3.0) as usize;
            pca_loading_share(t, comps, meter)
        }
        _ => {
            let bins = block.num("fs.bins").unwrap_or(10.0) as usize;
            let mut scores = Vec::with_capacity(t.p);
            for j in 0..t.p {
                let s = match (evaluator, t.kinds[j]) {
                    ("correlation", ColKind::Numeric) => {
                        let x: Vec<f64> = (0..n).map(|i| t.at(i, j)).collect();
                        (0..k)
                            .map(|c| {
                                let ind: Vec<f64> = t.y.iter().map(|&y| f64::from(u8::from(y == c))).collect();
                                pearson(&x, &ind).abs()
                            })
                            .fold(0.0, f64::max)
                    }
                    _ => {
                        let (codes, levels) = discretize(t, j, bins.max(2));
                        let m = contingency(&codes, levels, &t.y, k);
                        if evaluator == "info_gain" {
                            info_gain_ratio(&m)
                        } else {
                            cramers_v(&m)
                        }
                    }
                };
                scores.push(s);
                meter.charge(n as u64 * log_n.max(1) * k as u64);
                meter.check()?;
            }
            Ok(scores)
        }
    }
}

/// Share of the leading components' variance carried by each feature,
/// scaled so the top feature scores 1.
fn pca_loading_share(t: &Table, comps: usize, meter: &mut Meter) -> Result<Vec<f64>, Abort> {
    let n = t.n();
    let p = t.p;
    let nf = n.max(1) as f64;
    let mut z = vec![0.0; n * p];
    for j in 0..p {
        let mean = (0..n).map(|i| t.at(i, j)).sum::<f64>() / nf;
        let sd = ((0..n).map(|i| (t.at(i, j) - mean).powi(2)).sum::<f64>() / nf).sqrt();
        for i in 0..n {
            z[i * p + j] = if sd > 0.0 { (t.at(i, j) - mean) / sd } else { 0.0 };
        }
    }
    let mut cov = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = (0..n).map(|i| z[i * p + a] * z[i * p + b]).sum::<f64>() / nf;
            cov[a * p + b] = s;
            cov[b * p + a] = s;
        }
        meter.charge((n * p) as u64);
        meter.check()?;
    }
    let mut share = vec![0.0; p];
    let mut total = 0.0;
    for c in 0..comps.min(p) {
        let mut v: Vec<f64> = (0..p).map(|j| 1.0 + ((j + c) % 7) as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let w: Vec<f64> = (0..p).map(|a| (0..p).map(|b| cov[a * p + b] * v[b]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 1e-15 {
                lambda = 0.0;
                break;
            }
            lambda = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        meter.charge((POWER_ITERATIONS * p * p) as u64);
        meter.check()?;
        if lambda <= 0.0 {
            break;
        }
        for j in 0..p {
            share[j] += lambda * v[j] * v[j];
        }
        total += lambda;
        for a in 0..p {
            for b in 0..p {
                cov[a * p + b] -= lambda * v[a] * v[b];
            }
        }
    }
    if total <= 0.0 {
        return Ok(vec![0.0; p]);
    }
    let top = share.iter().cloned().fold(0.0, f64::max);
    Ok(share.into_iter().map(|s| if top > 0.0 { s / top } else { 0.0 }).collect())
}

/// Correlation-based subset merit from symmetric uncertainties.
pub struct Merit {
    class: Vec<f64>,
    pair: Vec<f64>,
    p: usize,
}

impl Merit {
    pub fn new(t: &Table, meter: &mut Meter) -> Result<Merit, Abort> {
        let p = t.p;
        let n = t.n() as u64;
        let disc: Vec<(Vec<usize>, usize)> = (0..p).map(|j| discretize(t, j, CFS_BINS)).collect();
        let class = disc
            .iter()
            .map(|(c, l)| symmetric_uncertainty(&contingency(c, *l, &t.y, t.n_classes)))
            .collect();
        meter.charge(n * p as u64);
        meter.check()?;
        let mut pair = vec![1.0; p * p];
        for a in 0..p {
            for b in a + 1..p {
                let s = symmetric_uncertainty(&contingency(&disc[a].0, disc[a].1, &disc[b].0, disc[b].1));
                pair[a * p + b] = s;
                pair[b * p + a] = s;
            }
            meter.charge(n * (p - a) as u64);
            meter.check()?;
        }
        Ok(Merit { class, pair, p })
    }

    pub fn merit(&self, subset: &[usize]) -> f64 {
        let k = subset.len() as f64;
        if subset.is_empty() {
            return 0.0;
        }
        let rcf: f64 = subset.iter().map(|&j| self.class[j]).sum::<f64>() / k;
        let mut rff = 0.0;
        let mut pairs = 0.0;
        for (x, &a) in subset.iter().enumerate() {
            for &b in &subset[x + 1..] {
                rff += self.pair[a * self.p + b];
                pairs += 1.0;
            }
        }
        let rff = if pairs > 0.0 { rff / pairs } else { 0.0 };
        k * rcf / (k + k * (k - 1.0) * rff).sqrt()
    }
}

fn greedy_forward(m: &Merit, cap: usize, meter: &mut Meter) -> Result<Vec<usize>, Abort> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut best = 0.0;
    while chosen.len() < cap {
        let mut step: Option<(f64, usize)> = None;
        for j in (0..m.p).filter(|j| !chosen.contains(j)) {
            let mut s = chosen.clone();
            s.push(j);
            let v = m.merit(&s);
            if step.map_or(true, |b| v > b.0) {
                step = Some((v, j));
            }
        }
        meter.charge((m.p * (chosen.len() + 1).pow(2)) as u64);
        meter.check()?;
        match step {
            Some((v, j)) if v > best + 1e-12 => {
                best = v;
                chosen.push(j);
            }
            _ => break,
        }
    }
    Ok(chosen)
}

#[derive(PartialEq)]
struct Node(f64, Vec<usize>);

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // max-heap on merit; among equals prefer the lexicographically smaller subset
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn best_first(m: &Merit, stale_limit: usize, backward: bool, meter: &mut Meter) -> Result<Vec<usize>, Abort> {
    let start: Vec<usize> = if backward { (0..m.p).collect() } else { Vec::new() };
    let mut open = BinaryHeap::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut best = (m.merit(&start), start.clone());
    seen.insert(start.clone());
    open.push(Node(best.0, start));
    let mut stale = 0;
    while let Some(Node(_, s)) = open.pop() {
        let mut improved = false;
        let children: Vec<Vec<usize>> = if backward {
            s.iter().map(|&j| s.iter().copied().filter(|&x| x != j).collect()).collect()
        } else {
            (0..m.p)
                .filter(|j| !s.contains(j))
                .map(|j| {
                    let mut c = s.clone();
                    c.push(j);
                    c.sort_unstable();
                    c
                })
                .collect()
        };
        for c in children {
            if !seen.insert(c.clone()) {
                continue;
            }
            let v = m.merit(&c);
            if v > best.0 + 1e-12 {
                best = (v, c.clone());
                improved = true;
            }
            open.push(Node(v, c));
        }
        meter.charge((m.p * (s.len() + 1).pow(2)) as u64);
        meter.check()?;
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= stale_limit {
                break;
            }
        }
    }
    Ok(best.1)
}
