//! Held-out comparison of the search against an equal-budget random search
//! and against runs with single techniques switched off.
//!
//! Every dataset is split once per seed into a stratified two-thirds
//! training part and a one-third test part. Each method searches on the
//! training part only; the returned model is scored on the test part.
//!
//! The random-search baseline draws an algorithm uniformly from the zoo and a
//! uniformly random combination for it, evaluates every draw with 10-fold
//! cross-validation on the whole training part under the fixed per-test
//! budgets, and stops once it has spent the search's total cost for the same
//! dataset and seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::SearchConfig;
use crate::dataset::{stratified_parts, Dataset};
use crate::engine::{run_search, Step, TraceRecord};
use crate::error::{Error, Result};
use crate::hyperspace::{check_validity, default_rules, random_combination, Combination};
use crate::learnzoo::model::TrainedModel;
use crate::learnzoo::registry::{self, family};
use crate::learnzoo::{fit_final, run_test, Budgets, EvalStatus};
use crate::rng::{self, stable_hash};
use crate::surrogate::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Psbo,
    RandomSearch,
    /// The search with one technique switched off.
    Without(u8),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Psbo => f.write_str("psbo"),
            Method::RandomSearch => f.write_str("random-search"),
            Method::Without(t) => write!(f, "without-t{t}"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "psbo" => Ok(Method::Psbo),
            "random-search" | "random" => Ok(Method::RandomSearch),
            _ => s
                .strip_prefix("without-t")
                .and_then(|t| t.parse::<u8>().ok())
                .filter(|t| (1..=crate::config::TECHNIQUES).contains(t))
                .map(Method::Without)
                .ok_or_else(|| Error::Config(format!("unknown bench method `{s}`"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Method, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Settings shared by every run; the seed and technique switches are
    /// overwritten per cell.
    pub base: SearchConfig,
    pub baseline_folds: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            methods: vec![Method::Psbo, Method::RandomSearch],
            seeds: (1..=5).collect(),
            base: SearchConfig::default(),
            baseline_folds: 10,
        }
    }
}

/// One (dataset, method, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub test_error: f64,
    pub cost: f64,
    pub distinct: usize,
    pub evaluations: usize,
    pub algorithm: String,
    pub family: String,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub method: Method,
    pub runs: usize,
    pub error_mean: f64,
    pub error_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub distinct_mean: f64,
    /// Set when there is a single run and the deviations are reported as 0.
    pub single_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub baseline: String,
    pub cells: Vec<Cell>,
    pub summaries: Vec<Summary>,
}

pub const BASELINE_NOTE: &str = "random-search: equal-cost uniform random search over the same space, \
     10-fold cross-validation on the full training part, fixed per-test budgets";

/// Stratified split into (training, test) row indices: two thirds, one third.
pub fn holdout_split(d: &Dataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let rows: Vec<usize> = (0..d.n()).collect();
    let mut r = rng::stream(seed, &[stable_hash("holdout")]);
    let mut parts = stratified_parts(d, &rows, 3, &mut r);
    let mut test = std::mem::take(&mut parts[0]);
    let mut train: Vec<usize> = parts.into_iter().flatten().collect();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn test_error(model: &TrainedModel, test: &Dataset) -> f64 {
    if test.n() == 0 {
        return 1.0;
    }
    let wrong = (0..test.n()).filter(|&i| model.predict_row(test.row(i)) != test.label(i)).count();
    wrong as f64 / test.n() as f64
}

/// Total cost recorded in a trace: every test plus every final-round fold.
pub fn trace_cost(trace: &[TraceRecord]) -> f64 {
    trace
        .iter()
        .map(|t| match t {
            TraceRecord::Eval { fs_time, train_time, validate_time, .. } => fs_time + train_time + validate_time,
            TraceRecord::FinalCv { time, .. } => *time,
            _ => 0.0,
        })
        .sum()
}

/// Distinct combinations that were executed at least once.
pub fn trace_distinct(trace: &[TraceRecord]) -> usize {
    trace
        .iter()
        .filter_map(|t| match t {
            TraceRecord::Eval { algorithm, combination, .. } => {
                Some(Combination::new(algorithm.clone(), combination.clone()).key())
            }
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn trace_evaluations(trace: &[TraceRecord]) -> usize {
    trace.iter().filter(|t| matches!(t, TraceRecord::Eval { .. })).count()
}

pub struct BaselineOutcome {
    pub model: TrainedModel,
    pub trace: Vec<TraceRecord>,
    pub best_error: f64,
}

/// Uniform random search until `budget` cost units are spent. Rule-rejected
/// draws are skipped without cost. Each fold's budgets are capped by what is
/// left; an evaluation cut by the cap is traced but never becomes the best.
pub fn random_search(d: &Dataset, cfg: &SearchConfig, budget: f64, folds: usize) -> Result<BaselineOutcome> {
    let entries: Vec<_> = registry::registry()
        .iter()
        .filter(|e| cfg.algorithms.as_ref().map_or(true, |a| a.iter().any(|x| x == e.id)))
        .collect();
    if entries.is_empty() {
        return Err(Error::Config("no algorithms selected".into()));
    }
    let clock = cfg.clock();
    let meta = d.meta();
    let rules = default_rules();
    let rows: Vec<usize> = (0..d.n()).collect();
    let mut r = rng::stream(cfg.seed, &[stable_hash("baseline")]);
    let parts = stratified_parts(d, &rows, folds.clamp(2, d.n().max(2)), &mut r);
    let budgets = Budgets { fs: cfg.fixed_fs_budget, train: cfg.fixed_train_budget };
    let mut trace = Vec::new();
    let mut cost = 0.0;
    let mut best: Option<(Combination, f64)> = None;
    let mut skips = 0;
    let mut draw = 0u64;
    while cost < budget && skips < cfg.skip_limit {
        draw += 1;
        let e = entries[rand::Rng::gen_range(&mut r, 0..entries.len())];
        let c = random_combination(e.id, &e.space, &mut r);
        if !check_validity(&c, &meta, &rules).is_ok() {
            skips += 1;
            continue;
        }
        skips = 0;
        let (mut fs_time, mut train_time, mut validate_time) = (0.0, 0.0, 0.0);
        let mut errors = Vec::with_capacity(parts.len());
        let mut status = EvalStatus::Complete;
        let mut cut = false;
        for (f, val) in parts.iter().enumerate() {
            let left = budget - cost - fs_time - train_time - validate_time;
            if left <= 0.0 {
                cut = true;
                break;
            }
            let limited = left < budgets.fs.max(budgets.train);
            let capped = Budgets { fs: budgets.fs.min(left), train: budgets.train.min(left) };
            let train: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            let mut fr = rng::stream(cfg.seed, &[stable_hash("baseline"), draw, f as u64]);
            let out = run_test(d, &c, &train, val, capped, &clock, &mut fr, false);
            cut |= limited && matches!(out.status, EvalStatus::FsTimeout | EvalStatus::TrainTimeout | EvalStatus::PartialModel);
            fs_time += out.fs_time;
            train_time += out.train_time;
            validate_time += out.validate_time;
            if out.status.is_failure() || (out.status == EvalStatus::PartialModel && status == EvalStatus::Complete) {
                status = out.status;
            }
            errors.push(out.error);
        }
        if cut {
            status = EvalStatus::TrainTimeout;
        }
        let mean = if cut { 1.0 } else { errors.iter().sum::<f64>() / errors.len() as f64 };
        cost += fs_time + train_time + validate_time;
        trace.push(TraceRecord::Eval {
            round: 0,
            algorithm: e.id.into(),
            step: Step::Baseline,
            combination: c.values.clone(),
            status,
            raw_error: mean,
            adjusted_error: mean,
            fold_errors: errors,
            fs_time,
            train_time,
            validate_time,
            provenance: Provenance::Tested,
            cached: None,
            diagnostic: cut.then(|| "cut at the search budget".to_string()),
        });
        if !cut && best.as_ref().map_or(true, |(_, b)| mean < *b) {
            best = Some((c, mean));
        }
    }
    let (c, best_error) = best.unwrap_or_else(|| {
        let e = entries[0];
        (Combination::new(e.id, e.space.default_values()), 1.0)
    });
    let mut fr = rng::stream(cfg.seed, &[stable_hash("baseline-final")]);
    let (columns, fit) =
        fit_final(d, &c, &mut fr).map_err(|e| Error::Search(format!("final model for `{}` failed: {e}", c.algorithm)))?;
    Ok(BaselineOutcome { model: TrainedModel::new(d, c, columns, fit), trace, best_error })
}

fn cell(dataset: &str, method: Method, seed: u64, model: &TrainedModel, test: &Dataset, trace: Vec<TraceRecord>) -> Cell {
    Cell {
        dataset: dataset.into(),
        method,
        seed,
        test_error: test_error(model, test),
        cost: trace_cost(&trace),
        distinct: trace_distinct(&trace),
        evaluations: trace_evaluations(&trace),
        algorithm: model.algorithm.clone(),
        family: family(&model.combination).into(),
        trace,
    }
}

/// Runs every method on every seed for one dataset. The baseline's budget
/// is the search's cost for the same seed, so the search always runs first.
pub fn bench_dataset(d: &Dataset, spec: &BenchSpec, mut progress: impl FnMut(&Cell)) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for &seed in &spec.seeds {
        let (train_rows, test_rows) = holdout_split(d, seed);
        let train = d.subset(&train_rows);
        let test = d.subset(&test_rows);
        let mut cfg = spec.base.clone();
        cfg.seed = seed;
        let needs_search = spec.methods.iter().any(|m| matches!(m, Method::Psbo | Method::RandomSearch));
        let mut search_cost = None;
        if needs_search {
            let o = run_search(&train, &cfg)?;
            let c = cell(d.name(), Method::Psbo, seed, &o.model, &test, o.trace);
            search_cost = Some(c.cost);
            if spec.methods.contains(&Method::Psbo) {
                progress(&c);
                out.push(c);
            }
        }
        for &m in &spec.methods {
            match m {
                Method::Psbo => {}
                Method::RandomSearch => {
                    let budget = search_cost.expect("search ran first");
                    let o = random_search(&train, &cfg, budget, spec.baseline_folds)?;
                    let c = cell(d.name(), m, seed, &o.model, &test, o.trace);
                    progress(&c);
                    out.push(c);
                }
                Method::Without(t) => {
                    let mut ab = cfg.clone();
                    if !ab.technique_off.contains(&t) {
                        ab.technique_off.push(t);
                    }
                    let o = run_search(&train, &ab)?;
                    let c = cell(d.name(), m, seed, &o.model, &test, o.trace);
                    progress(&c);
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

pub fn run_bench(datasets: &[Dataset], spec: &BenchSpec, mut progress: impl FnMut(&Cell)) -> Result<BenchReport> {
    if datasets.is_empty() {
        return Err(Error::Config("bench needs at least one dataset".into()));
    }
    if spec.seeds.is_empty() {
        return Err(Error::Config("bench needs at least one seed".into()));
    }
    let mut cells = Vec::new();
    for d in datasets {
        cells.extend(bench_dataset(d, spec, &mut progress)?);
    }
    let summaries = summarize(&cells);
    Ok(BenchReport { baseline: BASELINE_NOTE.into(), cells, summaries })
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups cells by (dataset, method) in first-appearance order of datasets.
pub fn summarize(cells: &[Cell]) -> Vec<Summary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, Method), Vec<&Cell>> = BTreeMap::new();
    for c in cells {
        let i = order.iter().position(|d| *d == c.dataset).unwrap_or_else(|| {
            order.push(&c.dataset);
            order.len() - 1
        });
        groups.entry((i, c.method)).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((i, method), cs)| {
            let errors: Vec<f64> = cs.iter().map(|c| c.test_error).collect();
            let costs: Vec<f64> = cs.iter().map(|c| c.cost).collect();
            let (error_mean, error_std) = mean_std(&errors);
            let (cost_mean, cost_std) = mean_std(&costs);
            Summary {
                dataset: order[i].to_string(),
                method,
                runs: cs.len(),
                error_mean,
                error_std,
                cost_mean,
                cost_std,
                distinct_mean: cs.iter().map(|c| c.distinct as f64).sum::<f64>() / cs.len() as f64,
                single_run: cs.len() == 1,
            }
        })
        .collect()
}

pub fn render_table(summaries: &[Summary]) -> String {
    let mut s = format!(
        "{:<16} {:<14} {:>4} {:>18} {:>24} {:>10}\n",
        "dataset", "method", "runs", "test error", "cost", "distinct"
    );
    for m in summaries {
        let flag = if m.single_run { " (single run)" } else { "" };
        s.push_str(&format!(
            "{:<16} {:<14} {:>4} {:>18} {:>24} {:>10.1}{flag}\n",
            m.dataset,
            m.method.to_string(),
            m.runs,
            format!("{:.4} ± {:.4}", m.error_mean, m.error_std),
            format!("{:.1} ± {:.1}", m.cost_mean, m.cost_std),
            m.distinct_mean,
        ));
    }
    s
}

/// Per-run rows for plotting.
pub fn cells_csv(cells: &[Cell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "method", "seed", "test_error", "cost", "distinct", "evaluations", "algorithm", "family"])
        .expect("in-memory write");
    for c in cells {
        w.write_record([
            c.dataset.clone(),
            c.method.to_string(),
            c.seed.to_string(),
            c.test_error.to_string(),
            c.cost.to_string(),
            c.distinct.to_string(),
            c.evaluations.to_string(),
            c.algorithm.clone(),
            c.family.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_round_trip() {
        for m in [Method::Psbo, Method::RandomSearch, Method::Without(3)] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("without-t9".parse::<Method>().is_err());
    }

    #[test]
    fn mean_std_single_and_many() {
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn holdout_is_a_partition() {
        let d = crate::synth::planted_tree(99, 1, 0.1, 2);
        let (tr, te) = holdout_split(&d, 4);
        assert_eq!(te.len(), 33);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..99).collect::<Vec<_>>());
    }

    #[test]
    fn baseline_stays_close_to_its_budget() {
        let d = crate::synth::credit_like(300, 3);
        for budget in [50.0, 400.0] {
            let o = random_search(&d, &SearchConfig::default(), budget, 10).unwrap();
            let cost = trace_cost(&o.trace);
            assert!(cost >= budget && cost <= budget * 1.05, "budget {budget}, cost {cost}");
            for t in &o.trace {
                if let TraceRecord::Eval { raw_error, diagnostic: Some(_), .. } = t {
                    assert_eq!(*raw_error, 1.0);
                }
            }
        }
    }

    #[test]
    fn single_run_flag() {
        let c = Cell {
            dataset: "d".into(),
            method: Method::Psbo,
            seed: 1,
            test_error: 0.2,
            cost: 5.0,
            distinct: 3,
            evaluations: 4,
            algorithm: "knn".into(),
            family: "instance".into(),
            trace: Vec::new(),
        };
        let s = summarize(&[c]);
        assert!(s[0].single_run);
        assert_eq!(s[0].error_std, 0.0);
        assert!(render_table(&s).contains("(single run)"));
    }
}
