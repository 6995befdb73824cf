//! Dense training tables and the numeric encoders shared by the linear and
//! instance-based learners.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColKind {
    Numeric,
    Categorical { levels: usize },
}

/// Row-major copy of selected rows and columns of a dataset. Categorical
/// cells hold their level index.
#[derive(Debug, Clone)]
pub struct Table {
    pub x: Vec<f64>,
    pub p: usize,
    pub y: Vec<usize>,
    pub kinds: Vec<ColKind>,
    pub n_classes: usize,
}

pub fn col_kinds(d: &Dataset, cols: &[usize]) -> Vec<ColKind> {
    cols.iter()
        .map(|&j| match d.features()[j].kind {
            FeatureKind::Numeric => ColKind::Numeric,
            FeatureKind::Categorical => ColKind::Categorical {
                levels: d.features()[j].levels.len(),
            },
        })
        .collect()
}

impl Table {
    pub fn from_dataset(d: &Dataset, rows: &[usize], cols: &[usize]) -> Table {
        let mut x = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = d.row(i);
            x.extend(cols.iter().map(|&j| r[j]));
        }
        Table {
            x,
            p: cols.len(),
            y: rows.iter().map(|&i| d.label(i)).collect(),
            kinds: col_kinds(d, cols),
            n_classes: d.n_classes(),
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    /// A table of the given rows; repeats are allowed (bootstrap samples).
    pub fn take(&self, idx: &[usize]) -> Table {
        let mut x = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Table {
            x,
            p: self.p,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            kinds: self.kinds.clone(),
            n_classes: self.n_classes,
        }
    }

    /// A table restricted to the given columns.
    pub fn select(&self, cols: &[usize]) -> Table {
        let mut x = Vec::with_capacity(self.n() * cols.len());
        for i in 0..self.n() {
            let r = self.row(i);
            x.extend(cols.iter().map(|&j| r[j]));
        }
        Table {
            x,
            p: cols.len(),
            y: self.y.clone(),
            kinds: cols.iter().map(|&j| self.kinds[j]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }

    pub fn majority(&self) -> usize {
        argmax_usize(&self.class_counts())
    }
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax_usize(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c > v[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericScaling {
    /// Zero mean, unit variance.
    Standard,
    /// Map the training range to [0, 1].
    MinMax,
}

/// Numeric encoder: scales numeric columns and one-hot encodes categorical
/// ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    kinds: Vec<ColKind>,
    shift: Vec<f64>,
    scale: Vec<f64>,
    width: usize,
}

impl Encoder {
    pub fn fit(t: &Table, scaling: NumericScaling) -> Encoder {
        let n = t.n().max(1) as f64;
        let mut shift = vec![0.0; t.p];
        let mut scale = vec![1.0; t.p];
        let mut width = 0;
        for j in 0..t.p {
            match t.kinds[j] {
                ColKind::Numeric => {
                    width += 1;
                    let col = (0..t.n()).map(|i| t.at(i, j));
                    match scaling {
                        NumericScaling::Standard => {
                            let mean = col.clone().sum::<f64>() / n;
                            let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                            shift[j] = mean;
                            scale[j] = if var > 1e-24 { 1.0 / var.sqrt() } else { 1.0 };
                        }
                        NumericScaling::MinMax => {
                            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                                (a.min(v), b.max(v))
                            });
                            if lo.is_finite() {
                                shift[j] = lo;
                                scale[j] = if hi - lo > 1e-12 { 1.0 / (hi - lo) } else { 1.0 };
                            }
                        }
                    }
                }
                ColKind::Categorical { levels } => width += levels,
            }
        }
        Encoder {
            kinds: t.kinds.clone(),
            shift,
            scale,
            width,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (j, &v) in x.iter().enumerate() {
            match self.kinds[j] {
                ColKind::Numeric => out.push((v - self.shift[j]) * self.scale[j]),
                ColKind::Categorical { levels } => {
                    let start = out.len();
                    out.resize(start + levels, 0.0);
                    let l = v as usize;
                    if l < levels {
                        out[start + l] = 1.0;
                    }
                }
            }
        }
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        self.encode_into(x, &mut out);
        out
    }

    pub fn encode_table(&self, t: &Table) -> Vec<Vec<f64>> {
        (0..t.n()).map(|i| self.encode(t.row(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        Table {
            x: vec![0.0, 1.0, 2.0, 0.0, 4.0, 2.0],
            p: 2,
            y: vec![0, 1, 1],
            kinds: vec![ColKind::Numeric, ColKind::Categorical { levels: 3 }],
            n_classes: 2,
        }
    }

    #[test]
    fn minmax_and_one_hot() {
        let t = table();
        let e = Encoder::fit(&t, NumericScaling::MinMax);
        assert_eq!(e.width(), 4);
        assert_eq!(e.encode(t.row(1)), vec![0.5, 1.0, 0.0, 0.0]);
        assert_eq!(e.encode(t.row(2)), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn take_repeats_rows() {
        let t = table().take(&[2, 2, 0]);
        assert_eq!(t.y, vec![1, 1, 0]);
        assert_eq!(t.row(1), &[4.0, 2.0]);
        assert_eq!(t.majority(), 1);
    }
}
