//! Linear learners trained by stochastic gradient steps: logistic regression
//! and a Pegasos-style support vector machine. Both are anytime, one unit per
//! epoch.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::params::Params;
use crate::learnzoo::table::{argmax, Encoder, NumericScaling, Table};
use crate::learnzoo::Fit;
use crate::rng::Rng;

/// Upper bound on binary problems for output codes; beyond it training
/// fails instead of exhausting memory.
const MAX_CODES: usize = 4096;

/// Random Fourier features approximating an RBF kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rff {
    omega: Vec<Vec<f64>>,
    phase: Vec<f64>,
}

impl Rff {
    fn new(dim: usize, components: usize, gamma: f64, rng: &mut Rng) -> Rff {
        let sd = (2.0 * gamma).sqrt();
        let omega = (0..components)
            .map(|_| (0..dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let phase = (0..components)
            .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
            .collect();
        Rff { omega, phase }
    }

    fn map(&self, z: &[f64]) -> Vec<f64> {
        let s = (2.0 / self.phase.len() as f64).sqrt();
        self.omega
            .iter()
            .zip(&self.phase)
            .map(|(w, b)| s * (dot(w, z) + b).cos())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decoder {
    /// One weight row per class, highest score wins.
    ArgMax,
    /// One weight row per binary problem; class `c` is positive in problem
    /// `m` iff `codes[c][m]`. The class whose code word is nearest (L1) to
    /// the predicted probabilities wins.
    Codes { codes: Vec<Vec<bool>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    encoder: Encoder,
    rff: Option<Rff>,
    /// Rows of weights; the last entry of each row is the bias.
    weights: Vec<Vec<f64>>,
    decoder: Decoder,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinearModel {
    fn features(&self, x: &[f64]) -> Vec<f64> {
        let z = self.encoder.encode(x);
        let mut f = match &self.rff {
            Some(r) => r.map(&z),
            None => z,
        };
        f.push(1.0);
        f
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let f = self.features(x);
        let scores: Vec<f64> = self.weights.iter().map(|w| dot(w, &f)).collect();
        match &self.decoder {
            Decoder::ArgMax => argmax(&scores),
            Decoder::Codes { codes } => {
                let p: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
                let loss: Vec<f64> = codes
                    .iter()
                    .map(|row| {
                        -row.iter()
                            .zip(&p)
                            .map(|(&b, &q)| if b { 1.0 - q } else { q })
                            .sum::<f64>()
                    })
                    .collect();
                argmax(&loss)
            }
        }
    }

    pub fn predict_ops(&self) -> u64 {
        let d = self.weights.first().map_or(1, Vec::len) as u64;
        let rff = self.rff.as_ref().map_or(0, |r| (r.omega.len() * self.encoder.width()) as u64);
        d * self.weights.len() as u64 + rff
    }
}

/// Exhaustive code matrix: every split of the classes into two nonempty
/// sides, with class 0 always on the positive side.
pub fn exhaustive_codes(k: usize) -> Vec<Vec<bool>> {
    let m = (1usize << (k - 1)) - 1;
    (0..k)
        .map(|c| {
            (0..m)
                .map(|b| c == 0 || (b >> (c - 1)) & 1 == 1)
                .collect()
        })
        .collect()
}

fn design(t: &Table, encoder: &Encoder, rff: Option<&Rff>) -> Vec<Vec<f64>> {
    encoder
        .encode_table(t)
        .into_iter()
        .map(|z| {
            let mut f = match rff {
                Some(r) => r.map(&z),
                None => z,
            };
            f.push(1.0);
            f
        })
        .collect()
}

pub fn train_logistic(t: &Table, p: &Params, rng: &mut Rng, meter: &mut Meter) -> Result<Fit<LinearModel>, Abort> {
    meter.check()?;
    let l2 = p.num("l2")?;
    let lr = p.num("learning_rate")?;
    let epochs = p.int("epochs")?.max(1);
    let k = t.n_classes;
    let encoder = Encoder::fit(t, NumericScaling::Standard);
    let x = design(t, &encoder, None);
    let d = encoder.width() + 1;
    let (decoder, rows) = match p.cat("multiclass")? {
        "multinomial" => (Decoder::ArgMax, k),
        mode => {
            let codes: Vec<Vec<bool>> = if mode == "exhaustive_codes" {
                if k > 63 || (1usize << (k - 1)) - 1 > MAX_CODES {
                    return Err(Abort::Failure(format!("{k} classes need too many output codes")));
                }
                exhaustive_codes(k)
            } else {
                (0..k).map(|c| (0..k).map(|m| m == c).collect()).collect()
            };
            let m = codes[0].len();
            (Decoder::Codes { codes }, m)
        }
    };
    let mut w = vec![vec![0.0; d]; rows];
    let mut order: Vec<usize> = (0..t.n()).collect();
    let mut done = 0;
    for epoch in 0..epochs {
        if meter.exhausted() {
            break;
        }
        order.shuffle(rng);
        let step = lr / (1.0 + epoch as f64).sqrt();
        let decay = 1.0 - step * l2;
        for &i in &order {
            let xi = &x[i];
            match &decoder {
                Decoder::ArgMax => {
                    let s: Vec<f64> = w.iter().map(|wk| dot(wk, xi)).collect();
                    let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = s.iter().map(|v| (v - mx).exp()).collect();
                    let z: f64 = e.iter().sum();
                    for (c, wk) in w.iter_mut().enumerate() {
                        let g = e[c] / z - f64::from(u8::from(t.y[i] == c));
                        for (wj, xj) in wk.iter_mut().zip(xi) {
                            *wj = *wj * decay - step * g * xj;
                        }
                    }
                }
                Decoder::Codes { codes } => {
                    for (m, wm) in w.iter_mut().enumerate() {
                        let target = f64::from(u8::from(codes[t.y[i]][m]));
                        let g = sigmoid(dot(wm, xi)) - target;
                        for (wj, xj) in wm.iter_mut().zip(xi) {
                            *wj = *wj * decay - step * g * xj;
                        }
                    }
                }
            }
        }
        if w.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Abort::Failure("logistic regression diverged".into()));
        }
        meter.charge((t.n() * d * rows) as u64);
        done += 1;
    }
    if done == 0 {
        return Err(Abort::Budget);
    }
    Ok(Fit {
        model: LinearModel { encoder, rff: None, weights: w, decoder },
        partial: done < epochs,
    })
}

pub fn train_svm(t: &Table, p: &Params, rng: &mut Rng, meter: &mut Meter) -> Result<Fit<LinearModel>, Abort> {
    meter.check()?;
    let c = p.num("c")?;
    let epochs = p.int("epochs")?.max(1);
    let encoder = Encoder::fit(t, NumericScaling::Standard);
    let rff = if p.cat("kernel")? == "rbf" {
        let comps = p.int("components")?.max(1);
        let r = Rff::new(encoder.width(), comps, p.num("gamma")?, rng);
        meter.charge((t.n() * comps * encoder.width()) as u64);
        Some(r)
    } else {
        None
    };
    let x = design(t, &encoder, rff.as_ref());
    let d = x.first().map_or(1, Vec::len);
    let k = t.n_classes;
    // one-vs-rest; a binary problem needs a single separator
    let rows = if k == 2 { 1 } else { k };
    let lambda = 1.0 / (c * t.n().max(1) as f64);
    let mut w = vec![vec![0.0; d]; rows];
    let mut order: Vec<usize> = (0..t.n()).collect();
    let mut step_count = 0u64;
    let mut done = 0;
    for _ in 0..epochs {
        if meter.exhausted() {
            break;
        }
        order.shuffle(rng);
        for &i in &order {
            step_count += 1;
            let eta = 1.0 / (lambda * step_count as f64);
            let xi = &x[i];
            for (m, wm) in w.iter_mut().enumerate() {
                let positive = if rows == 1 { t.y[i] == 1 } else { t.y[i] == m };
                let y = if positive { 1.0 } else { -1.0 };
                let margin = y * dot(wm, xi);
                let shrink = 1.0 - eta * lambda;
                for v in wm.iter_mut() {
                    *v *= shrink;
                }
                if margin < 1.0 {
                    for (v, xj) in wm.iter_mut().zip(xi) {
                        *v += eta * y * xj;
                    }
                }
            }
        }
        meter.charge((t.n() * d * rows) as u64);
        done += 1;
    }
    if done == 0 {
        return Err(Abort::Budget);
    }
    if rows == 1 {
        // two rows (negated) so prediction is a plain argmax
        let neg: Vec<f64> = w[0].iter().map(|v| -v).collect();
        w.insert(0, neg);
    }
    Ok(Fit {
        model: LinearModel { encoder, rff, weights: w, decoder: Decoder::ArgMax },
        partial: done < epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_code_shape() {
        let c = exhaustive_codes(4);
        assert_eq!(c.len(), 4);
        assert_eq!(c[0].len(), 7);
        assert!(c[0].iter().all(|&b| b));
        // every column splits the classes into two nonempty sides
        for m in 0..7 {
            assert!((1..4).any(|k| !c[k][m]));
        }
        // code words are pairwise distinct
        for a in 0..4 {
            for b in a + 1..4 {
                assert_ne!(c[a], c[b]);
            }
        }
    }
}
