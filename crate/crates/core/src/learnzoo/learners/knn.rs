use serde::{Deserialize, Serialize};

use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::params::Params;
use crate::learnzoo::table::{argmax, ColKind, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    distance_weighted: bool,
    manhattan: bool,
    kinds: Vec<ColKind>,
    /// Min-max scaling of numeric columns; categorical columns compare by
    /// level (0 if equal, 1 otherwise).
    shift: Vec<f64>,
    scale: Vec<f64>,
    x: Vec<f64>,
    y: Vec<usize>,
    n_classes: usize,
}

impl KnnModel {
    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| match self.kinds[j] {
                ColKind::Numeric => (v - self.shift[j]) * self.scale[j],
                ColKind::Categorical { .. } => v,
            })
            .collect()
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..a.len() {
            let d = match self.kinds[j] {
                ColKind::Numeric => (a[j] - b[j]).abs(),
                ColKind::Categorical { .. } => f64::from(u8::from(a[j] != b[j])),
            };
            s += if self.manhattan { d } else { d * d };
        }
        if self.manhattan {
            s
        } else {
            s.sqrt()
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.kinds.len();
        let q = self.scaled(x);
        let mut d: Vec<(f64, usize)> = (0..self.y.len())
            .map(|i| (self.distance(&q, &self.x[i * p..(i + 1) * p]), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0.0; self.n_classes];
        for &(dist, i) in &d[..k] {
            votes[self.y[i]] += if self.distance_weighted { 1.0 / (dist + 1e-9) } else { 1.0 };
        }
        argmax(&votes)
    }

    pub fn predict_ops(&self) -> u64 {
        (self.y.len() * self.kinds.len().max(1)) as u64
    }
}

/// Not anytime: storing the training set is all or nothing.
pub fn train(t: &Table, p: &Params, meter: &mut Meter) -> Result<KnnModel, Abort> {
    meter.check()?;
    let mut shift = vec![0.0; t.p];
    let mut scale = vec![1.0; t.p];
    for j in 0..t.p {
        if t.kinds[j] == ColKind::Numeric {
            let (lo, hi) = (0..t.n())
                .map(|i| t.at(i, j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if lo.is_finite() {
                shift[j] = lo;
                scale[j] = if hi - lo > 1e-12 { 1.0 / (hi - lo) } else { 1.0 };
            }
        }
    }
    let mut model = KnnModel {
        k: p.int("k")?.max(1),
        distance_weighted: p.cat("weighting")? == "distance",
        manhattan: p.cat("metric")? == "manhattan",
        kinds: t.kinds.clone(),
        shift,
        scale,
        x: Vec::with_capacity(t.x.len()),
        y: t.y.clone(),
        n_classes: t.n_classes,
    };
    for i in 0..t.n() {
        let s = model.scaled(t.row(i));
        model.x.extend(s);
    }
    meter.charge((t.n() * t.p.max(1)) as u64);
    meter.check()?;
    Ok(model)
}
