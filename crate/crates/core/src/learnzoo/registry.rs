//! The algorithm zoo: ids, kinds, families, and hyper-parameter spaces.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::features::fs_space;
use crate::hyperspace::{Combination, Condition, HyperParam, HyperSpace, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    Base,
    Meta,
    Ensemble,
}

#[derive(Debug, Clone)]
pub struct AlgorithmEntry {
    pub id: &'static str,
    pub kind: AlgoKind,
    /// Coarse model family (tree, linear, instance, probabilistic, baseline,
    /// ensemble); a meta algorithm reports its base's family.
    pub family: &'static str,
    /// Never removed in the first two rounds.
    pub protected: bool,
    /// Keeps a usable partial model when the budget runs out.
    pub anytime: bool,
    /// Full space, feature-selection block included.
    pub space: HyperSpace,
    /// Categorical parameters whose levels are base algorithm ids.
    pub base_params: Vec<&'static str>,
}

pub const ADABOOST_BASES: [&str; 4] = ["decision_tree", "naive_bayes", "logistic_regression", "knn"];
pub const VOTE_BASES: [&str; 5] = ["decision_tree", "naive_bayes", "knn", "logistic_regression", "linear_svm"];

fn cat(name: &str, levels: &[&str], default: &str) -> HyperParam {
    HyperParam::categorical(name, levels, default)
}

fn num(name: &str, min: f64, max: f64, scale: Scale, default: f64) -> HyperParam {
    HyperParam::numeric(name, min, max, scale, false, default)
}

fn int(name: &str, min: f64, max: f64, scale: Scale, default: f64) -> HyperParam {
    HyperParam::numeric(name, min, max, scale, true, default)
}

const BOOL: [&str; 2] = ["false", "true"];

/// A learner's own parameters, without the feature-selection block.
pub fn learner_space(id: &str) -> HyperSpace {
    use Scale::{Linear, Log};
    let params = match id {
        "zero_r" => vec![],
        "knn" => vec![
            int("k", 1.0, 64.0, Log, 5.0),
            cat("weighting", &["uniform", "distance"], "uniform"),
            cat("metric", &["euclidean", "manhattan"], "euclidean"),
        ],
        "naive_bayes" => vec![
            cat("kernel_density", &BOOL, "false"),
            cat("supervised_discretization", &BOOL, "false"),
        ],
        "decision_tree" => vec![
            cat("criterion", &["gini", "entropy"], "gini"),
            cat("depth_limited", &BOOL, "false"),
            int("max_depth", 1.0, 30.0, Linear, 10.0).when("depth_limited", &["true"]),
            int("min_leaf", 1.0, 32.0, Log, 1.0),
        ],
        "random_forest" => vec![
            int("trees", 10.0, 1000.0, Log, 100.0),
            cat("max_features", &["sqrt", "log2", "half", "all"], "sqrt"),
            cat("depth_limited", &BOOL, "false"),
            int("max_depth", 1.0, 30.0, Linear, 10.0).when("depth_limited", &["true"]),
            int("min_leaf", 1.0, 32.0, Log, 1.0),
        ],
        "linear_svm" => vec![
            num("c", 1e-3, 1e3, Log, 1.0),
            int("epochs", 5.0, 200.0, Log, 20.0),
            cat("kernel", &["linear", "rbf"], "linear"),
            num("gamma", 1e-3, 10.0, Log, 0.1).when("kernel", &["rbf"]),
            int("components", 16.0, 512.0, Log, 128.0).when("kernel", &["rbf"]),
        ],
        "logistic_regression" => vec![
            num("l2", 1e-6, 1e-1, Log, 1e-4),
            num("learning_rate", 1e-3, 1.0, Log, 0.1),
            int("epochs", 5.0, 200.0, Log, 30.0),
            cat("multiclass", &["multinomial", "one_vs_rest", "exhaustive_codes"], "multinomial"),
        ],
        "gradient_boosting" => vec![
            int("rounds", 10.0, 500.0, Log, 100.0),
            num("learning_rate", 0.01, 1.0, Log, 0.1),
            int("max_depth", 1.0, 8.0, Linear, 3.0),
            num("subsample", 0.3, 1.0, Linear, 1.0),
        ],
        "adaboost" => {
            let mut space = HyperSpace::new(vec![
                int("iterations", 2.0, 50.0, Linear, 10.0),
                cat("base", &ADABOOST_BASES, "decision_tree"),
            ])
            .expect("adaboost space");
            for base in ADABOOST_BASES {
                space = space
                    .nest(
                        &learner_space(base),
                        &format!("{base}."),
                        Some(Condition { parent: "base".into(), values: vec![base.into()] }),
                    )
                    .expect("nested base space");
            }
            return space;
        }
        "vote" => vec![
            cat("size", &["2", "3"], "2"),
            cat("slot1", &VOTE_BASES, "decision_tree"),
            cat("slot2", &VOTE_BASES, "naive_bayes"),
            cat("slot3", &VOTE_BASES, "knn").when("size", &["3"]),
        ],
        _ => vec![],
    };
    HyperSpace::new(params).expect("learner space is well formed")
}

fn make(id: &'static str, kind: AlgoKind, family: &'static str, protected: bool, anytime: bool) -> AlgorithmEntry {
    let own = learner_space(id);
    let space = if id == "zero_r" {
        own
    } else {
        let fs = fs_space();
        let mut params = own.params().to_vec();
        params.extend(fs.params().iter().cloned());
        HyperSpace::new(params).expect("learner and feature-selection names are disjoint")
    };
    let base_params = match id {
        "adaboost" => vec!["base"],
        "vote" => vec!["slot1", "slot2", "slot3"],
        _ => vec![],
    };
    AlgorithmEntry { id, kind, family, protected, anytime, space, base_params }
}

/// Registry order is also evaluation order: base algorithms first.
pub fn registry() -> &'static [AlgorithmEntry] {
    static REGISTRY: OnceLock<Vec<AlgorithmEntry>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        use AlgoKind::*;
        vec![
            make("zero_r", Base, "baseline", false, false),
            make("knn", Base, "instance", false, false),
            make("naive_bayes", Base, "probabilistic", false, false),
            make("decision_tree", Base, "tree", false, false),
            make("random_forest", Base, "tree", true, true),
            make("linear_svm", Base, "linear", true, true),
            make("logistic_regression", Base, "linear", false, true),
            make("gradient_boosting", Base, "tree", false, true),
            make("adaboost", Meta, "meta", false, true),
            make("vote", Ensemble, "ensemble", false, false),
        ]
    })
}

pub fn entry(id: &str) -> Option<&'static AlgorithmEntry> {
    registry().iter().find(|e| e.id == id)
}

/// Number of base algorithms a combination uses (0 for base algorithms).
pub fn n_b(c: &Combination) -> usize {
    match entry(&c.algorithm).map(|e| e.kind) {
        Some(AlgoKind::Meta) => 1,
        Some(AlgoKind::Ensemble) => ["slot1", "slot2", "slot3"]
            .iter()
            .filter(|s| c.cat(s).is_some())
            .count(),
        _ => 0,
    }
}

/// Model family of a combination; a meta algorithm takes its base's family.
pub fn family(c: &Combination) -> &'static str {
    match entry(&c.algorithm) {
        Some(e) if e.kind == AlgoKind::Meta => c
            .cat("base")
            .and_then(entry)
            .map_or(e.family, |b| b.family),
        Some(e) => e.family,
        None => "unknown",
    }
}

/// The entry's space with base-algorithm slots limited to `allowed` ids;
/// `None` when a slot would be left without any option.
pub fn restricted_space(e: &AlgorithmEntry, allowed: &[String]) -> Option<HyperSpace> {
    let mut space = e.space.clone();
    for name in &e.base_params {
        space = space.restrict_levels(name, allowed).ok()?;
    }
    Some(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::{default_combination, Value};
    use std::collections::BTreeSet;

    #[test]
    fn ids_are_unique_and_protection_matches() {
        let ids: BTreeSet<&str> = registry().iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), registry().len());
        let protected: BTreeSet<&str> = registry().iter().filter(|e| e.protected).map(|e| e.id).collect();
        assert_eq!(protected, BTreeSet::from(["random_forest", "linear_svm"]));
    }

    #[test]
    fn base_slots_reference_base_algorithms() {
        for e in registry() {
            for p in &e.base_params {
                if let Some(crate::hyperspace::ParamKind::Categorical { levels }) = e.space.param(p).map(|p| &p.kind) {
                    for l in levels {
                        assert_eq!(entry(l).unwrap().kind, AlgoKind::Base, "{} -> {l}", e.id);
                    }
                }
            }
        }
    }

    #[test]
    fn defaults() {
        let knn = default_combination("knn", &entry("knn").unwrap().space);
        assert_eq!(knn.num("k"), Some(5.0));
        assert_eq!(knn.cat("weighting"), Some("uniform"));
        assert!(!knn.uses_fs());
        let svm = default_combination("linear_svm", &entry("linear_svm").unwrap().space);
        assert_eq!(svm.get("gamma"), Some(&Value::Inactive));
        let rf = default_combination("random_forest", &entry("random_forest").unwrap().space);
        assert_eq!(rf.num("trees"), Some(100.0));
        assert_eq!(rf.get("max_depth"), Some(&Value::Inactive));
        assert!(entry("zero_r").unwrap().space.is_empty());
    }

    #[test]
    fn penalties_count_bases() {
        let ada = default_combination("adaboost", &entry("adaboost").unwrap().space);
        assert_eq!(n_b(&ada), 1);
        assert_eq!(family(&ada), "tree");
        let vote = default_combination("vote", &entry("vote").unwrap().space);
        assert_eq!(n_b(&vote), 2);
    }

    #[test]
    fn restriction_drops_removed_bases() {
        let e = entry("adaboost").unwrap();
        let s = restricted_space(e, &["knn".to_string()]).unwrap();
        assert_eq!(s.default_values()["base"], Value::Cat("knn".into()));
        assert!(restricted_space(e, &["random_forest".to_string()]).is_none());
    }
}
