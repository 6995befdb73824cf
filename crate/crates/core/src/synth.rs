//! Seeded synthetic datasets for tests, benchmarks and demos.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, FeatureKind, FeatureMeta};
use crate::rng::{self, stable_hash};

fn numeric(name: String) -> FeatureMeta {
    FeatureMeta { name, kind: FeatureKind::Numeric, levels: Vec::new(), imputed: 0 }
}

fn categorical(name: &str, levels: &[&str]) -> FeatureMeta {
    FeatureMeta {
        name: name.into(),
        kind: FeatureKind::Categorical,
        levels: levels.iter().map(|s| s.to_string()).collect(),
        imputed: 0,
    }
}

fn build(name: &str, features: Vec<FeatureMeta>, rows: Vec<Vec<f64>>, y: Vec<usize>, classes: &[&str]) -> Dataset {
    let cells = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
    let classes = classes.iter().map(|s| s.to_string()).collect();
    Dataset::from_cells(name, "class", features, cells, y, classes).expect("generator output is well formed")
}

/// Binary labels from a fixed depth-2 axis-aligned tree over `x0..x2`, with
/// `distractors` extra uniform features and each label flipped with
/// probability `noise`. The Bayes error is exactly `noise`.
pub fn planted_tree(n: usize, distractors: usize, noise: f64, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[stable_hash("planted-tree")]);
    let p = 3 + distractors;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| r.gen::<f64>()).collect();
        let clean = planted_rule(&x);
        y.push(if r.gen::<f64>() < noise { 1 - clean } else { clean });
        rows.push(x);
    }
    let features = (0..p).map(|j| numeric(format!("x{j}"))).collect();
    build("planted_tree", features, rows, y, &["neg", "pos"])
}

/// The noise-free label of [`planted_tree`].
pub fn planted_rule(x: &[f64]) -> usize {
    if x[0] < 0.5 {
        usize::from(x[1] >= 0.3)
    } else {
        usize::from(x[2] < 0.7)
    }
}

/// Full factorial of six ordinal attributes (1728 rows) labeled by a
/// hierarchical acceptability rule, four unbalanced classes.
pub fn car_like() -> Dataset {
    let features = vec![
        categorical("buying", &["vhigh", "high", "med", "low"]),
        categorical("maint", &["vhigh", "high", "med", "low"]),
        categorical("doors", &["2", "3", "4", "5more"]),
        categorical("persons", &["2", "4", "more"]),
        categorical("lug_boot", &["small", "med", "big"]),
        categorical("safety", &["low", "med", "high"]),
    ];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for b in 0..4 {
        for m in 0..4 {
            for d in 0..4 {
                for p in 0..3 {
                    for l in 0..3 {
                        for s in 0..3 {
                            rows.push(vec![b as f64, m as f64, d as f64, p as f64, l as f64, s as f64]);
                            y.push(car_rule(b, m, d, p, l, s));
                        }
                    }
                }
            }
        }
    }
    build("car_like", features, rows, y, &["unacc", "acc", "good", "vgood"])
}

fn car_rule(buying: usize, maint: usize, doors: usize, persons: usize, lug: usize, safety: usize) -> usize {
    if persons == 0 || safety == 0 {
        return 0;
    }
    let price = buying + maint; // 0 (very expensive) ..= 6 (cheap)
    let comfort = doors.min(2) + persons + lug; // 1 ..= 6
    if price <= 1 && (safety < 2 || comfort < 4) {
        return 0;
    }
    let score = price + comfort + 2 * safety;
    if (persons == 1 && doors == 0 && lug == 0) || score < 8 {
        0
    } else if score < 11 {
        1
    } else if score < 13 || price < 4 {
        2
    } else {
        3
    }
}

/// Eight numeric features, ten unbalanced overlapping Gaussian classes.
pub fn yeast_like(n: usize, seed: u64) -> Dataset {
    const WEIGHTS: [f64; 10] = [0.31, 0.29, 0.16, 0.11, 0.035, 0.03, 0.025, 0.02, 0.014, 0.006];
    let mut r = rng::stream(seed, &[stable_hash("yeast-like")]);
    let p = 8;
    let centers: Vec<Vec<f64>> = (0..WEIGHTS.len())
        .map(|_| (0..p).map(|_| r.gen_range(0.2..0.8)).collect())
        .collect();
    let noise = Normal::new(0.0, 0.18).expect("valid sigma");
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        // Every class appears at least once.
        let c = if i < WEIGHTS.len() { i } else { pick(&WEIGHTS, r.gen()) };
        rows.push(centers[c].iter().map(|m| m + noise.sample(&mut r)).collect());
        y.push(c);
    }
    let features = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc"].iter().map(|s| numeric(s.to_string())).collect();
    build(
        "yeast_like",
        features,
        rows,
        y,
        &["CYT", "NUC", "MIT", "ME3", "ME2", "ME1", "EXC", "VAC", "POX", "ERL"],
    )
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Thirteen categorical and seven numeric features, binary target with a
/// 70/30 split driven by a noisy additive score over a few of them.
pub fn credit_like(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[stable_hash("credit-like")]);
    let levels: [usize; 13] = [4, 5, 10, 5, 5, 4, 3, 4, 3, 3, 4, 2, 2];
    let mut features: Vec<FeatureMeta> = Vec::new();
    let names: Vec<Vec<String>> = levels.iter().map(|&k| (0..k).map(|l| format!("A{l}")).collect()).collect();
    for (j, ls) in names.iter().enumerate() {
        let refs: Vec<&str> = ls.iter().map(String::as_str).collect();
        features.push(categorical(&format!("c{j}"), &refs));
    }
    for j in 0..7 {
        features.push(numeric(format!("n{j}")));
    }
    let effects: Vec<Vec<f64>> = levels
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let scale = if j < 4 { 1.0 } else { 0.15 };
            let mut e: Vec<f64> = (0..k).map(|l| scale * (l as f64 / (k - 1) as f64 - 0.5) * 2.0).collect();
            e.shuffle(&mut r);
            e
        })
        .collect();
    let gauss = Normal::new(0.0, 1.0).expect("valid sigma");
    let mut rows = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(20);
        let mut score = 0.0;
        for (j, &k) in levels.iter().enumerate() {
            let l = r.gen_range(0..k);
            score += effects[j][l];
            row.push(l as f64);
        }
        for j in 0..7 {
            let v: f64 = gauss.sample(&mut r);
            if j < 2 {
                score += 0.6 * v;
            }
            row.push((v * 10.0 + 30.0).round());
        }
        score += gauss.sample(&mut r) * 0.9;
        rows.push(row);
        scores.push(score);
    }
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[(n as f64 * 0.7) as usize];
    let y = scores.iter().map(|&s| usize::from(s >= cut)).collect();
    build("credit_like", features, rows, y, &["good", "bad"])
}
