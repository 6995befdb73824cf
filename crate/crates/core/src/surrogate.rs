//! Random-forest surrogate over encoded combinations and the proposal step
//! of each optimization cycle.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::hyperspace::{Combination, HyperSpace};
use crate::learnzoo::learners::regtree::{self, RegTree, RegTreeParams};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Tested,
    RoughIdw,
    CacheInjected,
    RuleInjected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub combination: Combination,
    /// Adjusted (penalized) error.
    pub error: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 10, min_leaf: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateForest {
    pub algorithm: String,
    space: HyperSpace,
    trees: Vec<RegTree>,
    points: Vec<DataPoint>,
}

/// Encodes `c` as one column per parameter of `space`.
pub fn encode(space: &HyperSpace, c: &Combination) -> Vec<f64> {
    space
        .params()
        .iter()
        .map(|p| p.encode(c.get(&p.name).unwrap_or(&crate::hyperspace::Value::Inactive)))
        .collect()
}

/// Fits `params.trees` regression trees, each on a bootstrap of `points`
/// with a random subset of columns tried at every split.
pub fn fit(algorithm: &str, space: &HyperSpace, points: &[DataPoint], params: ForestParams, seed: u64) -> SurrogateForest {
    let p = space.len();
    let x: Vec<f64> = points.iter().flat_map(|d| encode(space, &d.combination)).collect();
    let y: Vec<f64> = points.iter().map(|d| d.error).collect();
    let tree_params = RegTreeParams {
        max_depth: None,
        min_leaf: params.min_leaf.max(1),
        max_features: Some(((p as f64 * 5.0 / 6.0).ceil() as usize).max(1)),
    };
    let mut r = rng::stream(seed, &[rng::stable_hash("surrogate"), rng::stable_hash(algorithm)]);
    let n = points.len();
    let trees = (0..params.trees.max(1))
        .map(|_| {
            let rows: Vec<usize> = if n == 0 { Vec::new() } else { (0..n).map(|_| r.gen_range(0..n)).collect() };
            regtree::fit(&x, p, &y, &rows, &tree_params, &mut r).tree
        })
        .collect();
    SurrogateForest {
        algorithm: algorithm.to_string(),
        space: space.clone(),
        trees,
        points: points.to_vec(),
    }
}

impl SurrogateForest {
    /// Mean over trees and the sample standard deviation of the tree outputs.
    pub fn predict(&self, c: &Combination) -> (f64, f64) {
        let x = encode(&self.space, c);
        let out: Vec<f64> = self.trees.iter().map(|t| t.predict(&x)).collect();
        if out.iter().all(|&v| v == out[0]) {
            return (out[0], 0.0);
        }
        let n = out.len() as f64;
        let mean = out.iter().sum::<f64>() / n;
        let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, var.max(0.0).sqrt())
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn space(&self) -> &HyperSpace {
        &self.space
    }

    /// Lowest error among the training points; 1.0 when there are none.
    pub fn incumbent_error(&self) -> f64 {
        self.points.iter().map(|d| d.error).fold(1.0, f64::min)
    }
}

/// Expected improvement below `best` for a minimization problem.
pub fn expected_improvement(mean: f64, spread: f64, best: f64) -> f64 {
    if !(spread > 0.0) {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / spread;
    let n = Normal::standard();
    ((best - mean) * n.cdf(z) + spread * n.pdf(z)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalParams {
    pub count: usize,
    pub pool: usize,
    pub incumbents: usize,
    pub redraws: usize,
}

impl Default for ProposalParams {
    fn default() -> Self {
        ProposalParams {
            count: 10,
            pool: 500,
            incumbents: 10,
            redraws: 50,
        }
    }
}

fn is_duplicate(space: &HyperSpace, c: &Combination, seen: &[Combination]) -> bool {
    seen.iter().any(|s| space.distance(&s.values, &c.values) == 0)
}

/// Proposes `params.count` combinations: positions 1, 3, 5, ... maximize
/// expected improvement over a candidate pool, positions 2, 4, ... are
/// uniform random draws. Combinations at distance 0 from `evaluated` or from
/// earlier proposals are redrawn up to `params.redraws` times.
pub fn propose(
    f: &SurrogateForest,
    space: &HyperSpace,
    incumbents: &[Combination],
    evaluated: &[Combination],
    rng: &mut Rng,
    params: ProposalParams,
) -> Vec<Combination> {
    let best = f.incumbent_error();
    let mut seen: Vec<Combination> = evaluated.to_vec();
    let mut out = Vec::with_capacity(params.count);
    for i in 0..params.count {
        let c = if i % 2 == 0 {
            guided(f, space, incumbents, &seen, best, rng, params)
        } else {
            let mut c = crate::hyperspace::random_combination(&f.algorithm, space, rng);
            for _ in 0..params.redraws {
                if !is_duplicate(space, &c, &seen) {
                    break;
                }
                c = crate::hyperspace::random_combination(&f.algorithm, space, rng);
            }
            c
        };
        seen.push(c.clone());
        out.push(c);
    }
    out
}

fn guided(
    f: &SurrogateForest,
    space: &HyperSpace,
    incumbents: &[Combination],
    seen: &[Combination],
    best: f64,
    rng: &mut Rng,
    params: ProposalParams,
) -> Combination {
    let mut pool: Vec<Combination> = (0..params.pool)
        .map(|_| crate::hyperspace::random_combination(&f.algorithm, space, rng))
        .collect();
    for inc in incumbents.iter().take(params.incumbents) {
        pool.push(Combination::new(f.algorithm.clone(), space.mutate(&inc.values, rng)));
    }
    let mut scored: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (m, s) = f.predict(c);
            (expected_improvement(m, s, best), i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored
        .iter()
        .take(params.redraws + 1)
        .map(|&(_, i)| &pool[i])
        .find(|c| !is_duplicate(space, c, seen))
        .unwrap_or(&pool[scored[0].1])
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::{HyperParam, Scale, Value};
    use std::collections::BTreeMap;

    fn space() -> HyperSpace {
        HyperSpace::new(vec![
            HyperParam::numeric("x", 0.0, 1.0, Scale::Linear, false, 0.5),
            HyperParam::categorical("k", &["a", "b"], "a"),
        ])
        .unwrap()
    }

    fn point(x: f64, k: &str, e: f64) -> DataPoint {
        let values = BTreeMap::from([("x".to_string(), Value::Num(x)), ("k".to_string(), Value::Cat(k.into()))]);
        DataPoint {
            combination: Combination::new("alg", values),
            error: e,
            provenance: Provenance::Tested,
        }
    }

    #[test]
    fn constant_target_is_reproduced() {
        let pts: Vec<DataPoint> = (0..20).map(|i| point(i as f64 / 20.0, "a", 0.3)).collect();
        let f = fit("alg", &space(), &pts, ForestParams::default(), 1);
        let (m, s) = f.predict(&point(0.77, "b", 0.0).combination);
        assert!((m - 0.3).abs() < 1e-12);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn single_point_is_predicted_everywhere() {
        let f = fit("alg", &space(), &[point(0.2, "a", 0.42)], ForestParams::default(), 3);
        assert_eq!(f.predict(&point(0.9, "b", 0.0).combination), (0.42, 0.0));
    }

    #[test]
    fn ei_closed_forms() {
        assert_eq!(expected_improvement(0.3, 0.0, 0.3), 0.0);
        assert!((expected_improvement(0.2, 0.0, 0.3) - 0.1).abs() < 1e-15);
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((expected_improvement(0.3, 0.1, 0.3) - 0.1 * phi0).abs() < 1e-12);
    }

    #[test]
    fn refit_is_deterministic() {
        let pts: Vec<DataPoint> = (0..30).map(|i| point(i as f64 / 30.0, ["a", "b"][i % 2], (i % 7) as f64 / 7.0)).collect();
        let a = fit("alg", &space(), &pts, ForestParams::default(), 9);
        let b = fit("alg", &space(), &pts, ForestParams::default(), 9);
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn proposals_alternate_and_avoid_duplicates() {
        let s = space();
        let pts: Vec<DataPoint> = (0..10).map(|i| point(i as f64 / 10.0, "a", 0.5)).collect();
        let f = fit("alg", &s, &pts, ForestParams::default(), 2);
        let evaluated: Vec<Combination> = pts.iter().map(|p| p.combination.clone()).collect();
        let mut r = rng::stream(5, &[1]);
        let out = propose(&f, &s, &evaluated, &evaluated, &mut r, ProposalParams::default());
        assert_eq!(out.len(), 10);
        for (i, c) in out.iter().enumerate() {
            assert!(!is_duplicate(&s, c, &evaluated), "proposal {i} duplicates a tested point");
            assert!(!is_duplicate(&s, c, &out[..i]), "proposal {i} repeats an earlier one");
        }
    }

    #[test]
    fn degenerate_space_allows_duplicates_after_redraws() {
        let s = HyperSpace::new(vec![HyperParam::categorical("only", &["x"], "x")]).unwrap();
        let c = Combination::new("alg", s.default_values());
        let pts = vec![DataPoint { combination: c.clone(), error: 0.4, provenance: Provenance::Tested }];
        let f = fit("alg", &s, &pts, ForestParams::default(), 0);
        let out = propose(&f, &s, &[c.clone()], &[c.clone()], &mut rng::stream(1, &[]), ProposalParams::default());
        assert!(out.iter().all(|o| *o == c));
    }
}
