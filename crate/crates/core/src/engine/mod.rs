//! The five-round search: screening, progressively sampled retests with
//! surrogate-guided proposals, pruning, and a cross-validated final pick.

pub mod cache;
pub mod estimate;
pub mod schedule;
pub mod tournament;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::SearchConfig;
use crate::dataset::{
    classify_size, final_cv_sample, make_sampling_plan, stratified_parts, Dataset, DatasetMeta, SamplingPlan,
    SizeClass, SizeTag,
};
use crate::error::{Error, Result};
use crate::hyperspace::{
    check_validity, default_rules, random_combination, Combination, HyperSpace, ValidityRule, Value, FS_PREFIX, FS_USE,
};
use crate::learnzoo::features::FsStatus;
use crate::learnzoo::meter::{Clock, ClockMode};
use crate::learnzoo::model::TrainedModel;
use crate::learnzoo::registry::{self, n_b, restricted_space};
use crate::learnzoo::{fit_final, run_test, AlgoKind, AlgorithmEntry, Budgets, EvalStatus};
use crate::rng::{self, stable_hash};
use crate::surrogate::{self, DataPoint, ForestParams, ProposalParams, Provenance};

pub use cache::{CacheCause, FsCache};
pub use estimate::{apply_penalties, compute_ratio, rough_estimate_idw, select_for_retest};
pub use schedule::{schedule, RoundSchedule, ROUNDS};
pub use trace::{Source, Step, TraceRecord};

pub const REPORT_FORMAT: &str = "psbo-report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub target: String,
    pub n: usize,
    pub p: usize,
    pub n_classes: usize,
    pub size: SizeTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub survivors_start: Vec<String>,
    pub survivors_end: Vec<String>,
    pub evaluations: usize,
    pub skips: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChampionSummary {
    pub algorithm: String,
    pub family: String,
    pub combination: Combination,
    /// `tournament`, `lowest-estimate`, or `fallback`.
    pub method: String,
    pub prev_estimate: f64,
    pub cv_mean: Option<f64>,
    pub uses_fs: bool,
    /// Features the final model reads.
    pub features_used: usize,
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    /// Configuration fields that differ from the defaults.
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub techniques_off: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub format: String,
    pub dataset: DatasetSummary,
    pub seed: u64,
    pub clock: ClockMode,
    pub champion: ChampionSummary,
    pub schedule: Vec<RoundSchedule>,
    pub rounds: Vec<RoundSummary>,
    /// Distinct combinations that were actually executed.
    pub distinct_combinations: usize,
    pub evaluations: usize,
    pub cache_entries: usize,
    /// Summed cost of every test, final-round folds included; the final fit
    /// on all instances is not counted.
    pub total_cost: f64,
    pub truncated: bool,
    pub provenance: ReportProvenance,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub report: SearchReport,
    pub model: TrainedModel,
    pub trace: Vec<TraceRecord>,
}

impl SearchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone)]
struct Estimate {
    combination: Combination,
    raw: f64,
}

#[derive(Debug, Clone)]
struct AlgState {
    entry: &'static AlgorithmEntry,
    space: HyperSpace,
    points: Vec<DataPoint>,
    point_index: BTreeMap<String, usize>,
    /// Error estimates of the combinations used in the current round.
    estimates: Vec<Estimate>,
    /// Everything proposed in the current round, for duplicate checks.
    round_seen: Vec<Combination>,
}

impl AlgState {
    fn id(&self) -> &'static str {
        self.entry.id
    }

    fn upsert_point(&mut self, p: DataPoint) {
        let key = p.combination.key();
        match self.point_index.get(&key) {
            Some(&i) => self.points[i] = p,
            None => {
                self.point_index.insert(key, self.points.len());
                self.points.push(p);
            }
        }
    }

    fn set_estimate(&mut self, combination: Combination, raw: f64) {
        let key = combination.key();
        match self.estimates.iter().position(|e| e.combination.key() == key) {
            Some(i) => self.estimates[i].raw = raw,
            None => self.estimates.push(Estimate { combination, raw }),
        }
    }

    fn min_error(&self) -> f64 {
        self.estimates.iter().map(|e| e.raw).fold(1.0, f64::min)
    }

    /// Estimates sorted by raw error; ties keep insertion order.
    fn ranked(&self) -> Vec<&Estimate> {
        let mut v: Vec<&Estimate> = self.estimates.iter().collect();
        v.sort_by(|a, b| a.raw.total_cmp(&b.raw));
        v
    }

    fn is_duplicate(&self, c: &Combination) -> bool {
        self.round_seen.iter().any(|s| self.space.distance(&s.values, &c.values) == 0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Tested {
    raw: f64,
    status: EvalStatus,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counters {
    evaluations: usize,
    skips: usize,
    cost: f64,
}

struct Search<'a> {
    d: &'a Dataset,
    cfg: &'a SearchConfig,
    clock: Clock,
    meta: DatasetMeta,
    size: SizeClass,
    plan: SamplingPlan,
    schedule: Vec<RoundSchedule>,
    rules: Vec<ValidityRule>,
    timeouts: FsCache,
    degenerate: FsCache,
    algs: Vec<AlgState>,
    survivors: Vec<usize>,
    trace: Vec<TraceRecord>,
    distinct: BTreeSet<String>,
    evaluations: usize,
    cost: f64,
    truncated: bool,
    rounds: Vec<RoundSummary>,
    counters: Counters,
}

/// Runs the whole search on `d` and trains the champion on every instance.
pub fn run_search(d: &Dataset, cfg: &SearchConfig) -> Result<SearchOutcome> {
    run_search_with_rules(d, cfg, default_rules())
}

pub fn run_search_with_rules(d: &Dataset, cfg: &SearchConfig, rules: Vec<ValidityRule>) -> Result<SearchOutcome> {
    let mut s = Search::new(d, cfg, rules)?;
    s.round_one();
    for round in 2..ROUNDS {
        if s.truncated || s.over_budget() {
            s.truncated = true;
            break;
        }
        s.intermediate_round(round);
    }
    s.finish()
}

impl<'a> Search<'a> {
    fn new(d: &'a Dataset, cfg: &'a SearchConfig, rules: Vec<ValidityRule>) -> Result<Search<'a>> {
        cfg.validate()?;
        let size = classify_size(d);
        let k = if cfg.technique(2) { cfg.k } else { Some(1) };
        let plan = make_sampling_plan(d, size, k, cfg.seed)?;
        let algs: Vec<AlgState> = registry::registry()
            .iter()
            .filter(|e| cfg.algorithms.as_ref().map_or(true, |a| a.iter().any(|x| x == e.id)))
            .map(|e| AlgState {
                entry: e,
                space: e.space.clone(),
                points: Vec::new(),
                point_index: BTreeMap::new(),
                estimates: Vec::new(),
                round_seen: Vec::new(),
            })
            .collect();
        if algs.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        Ok(Search {
            d,
            cfg,
            clock: cfg.clock(),
            meta: d.meta(),
            size,
            plan,
            schedule: schedule(cfg, size),
            rules,
            timeouts: FsCache::default(),
            degenerate: FsCache::default(),
            algs,
            survivors: Vec::new(),
            trace: Vec::new(),
            distinct: BTreeSet::new(),
            evaluations: 0,
            cost: 0.0,
            truncated: false,
            rounds: Vec::new(),
            counters: Counters::default(),
        })
    }
}

impl<'a> Search<'a> {
    fn over_budget(&self) -> bool {
        self.cfg.budget.is_some_and(|b| self.cost >= b)
    }

    fn ids(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&a| self.algs[a].id().to_string()).collect()
    }

    fn begin_round(&mut self, round: usize, survivors: &[usize]) {
        let s = &self.schedule[round - 1];
        let sample_sizes = if round < ROUNDS {
            (0..self.plan.k).map(|f| self.plan.sample_size(round, f)).collect()
        } else {
            Vec::new()
        };
        self.trace.push(TraceRecord::RoundStart {
            round,
            tau: s.tau,
            fs_budget: s.fs_budget,
            train_budget: s.train_budget,
            cycles: s.cycles,
            fraction: s.fraction,
            keep: s.keep,
            survivors: self.ids(survivors),
            sample_sizes,
        });
        self.counters = Counters::default();
        self.rounds.push(RoundSummary {
            round,
            survivors_start: self.ids(survivors),
            survivors_end: Vec::new(),
            evaluations: 0,
            skips: 0,
            cost: 0.0,
        });
    }

    fn end_round(&mut self) {
        let ids = self.ids(&self.survivors);
        let c = self.counters;
        if let Some(r) = self.rounds.last_mut() {
            r.survivors_end = ids;
            r.evaluations = c.evaluations;
            r.skips = c.skips;
            r.cost = c.cost;
        }
    }

    fn adjusted(&self, c: &Combination, raw: f64) -> f64 {
        let fs = (self.cfg.technique(6) && c.uses_fs()).then_some(self.cfg.fs_penalty);
        let rate = self.cfg.technique(7).then_some(self.cfg.base_penalty);
        apply_penalties(raw, fs, n_b(c), rate)
    }

    fn eval_seed(&self, round: usize, fold: usize, c: &Combination) -> rng::Rng {
        rng::stream(self.cfg.seed, &[round as u64, fold as u64, stable_hash(&c.key())])
    }

    /// Rule and cache checks ahead of a test.
    fn gate(&self, c: &Combination) -> Option<(EvalStatus, String, Provenance)> {
        if self.cfg.technique(8) {
            let v = check_validity(c, &self.meta, &self.rules);
            if !v.is_ok() {
                return Some((EvalStatus::RuleSkip, format!("{v:?}"), Provenance::RuleInjected));
            }
        }
        let block = c.fs_block()?;
        if self.cfg.technique(3) && self.timeouts.lookup(&block).is_some() {
            return Some((EvalStatus::CacheSkip, "timeout cache".into(), Provenance::CacheInjected));
        }
        if self.cfg.technique(5) {
            if let Some(e) = self.degenerate.lookup(&block) {
                let why = match e.cause {
                    CacheCause::AllSelected => "all-features cache",
                    _ => "no-features cache",
                };
                return Some((EvalStatus::CacheSkip, why.into(), Provenance::CacheInjected));
            }
        }
        None
    }

    fn record_skip(&mut self, a: usize, c: &Combination, round: usize, step: Step, skip: (EvalStatus, String, Provenance)) {
        let (status, reason, provenance) = skip;
        self.counters.skips += 1;
        self.trace.push(TraceRecord::Skip {
            round,
            algorithm: self.algs[a].id().into(),
            step,
            combination: c.values.clone(),
            status,
            reason,
            raw_error: 1.0,
            adjusted_error: 1.0,
            provenance,
        });
        self.algs[a].upsert_point(DataPoint { combination: c.clone(), error: 1.0, provenance });
    }

    /// Tests `c` on every fold of the round's training samples.
    fn test(&mut self, a: usize, c: &Combination, round: usize, step: Step) -> Tested {
        let sched = &self.schedule[round - 1];
        let budgets = Budgets { fs: sched.fs_budget, train: sched.train_budget };
        let inspect = self.cfg.technique(5);
        let mut folds = Vec::with_capacity(self.plan.k);
        let (mut fs_time, mut train_time, mut validate_time) = (0.0, 0.0, 0.0);
        let mut status = EvalStatus::Complete;
        let mut fs_fail: Option<(EvalStatus, Option<FsStatus>)> = None;
        let mut diagnostic = None;
        for f in 0..self.plan.k {
            let mut r = self.eval_seed(round, f, c);
            let train = self.plan.training_sample(round, f);
            let out = run_test(self.d, c, train, self.plan.validation(f), budgets, &self.clock, &mut r, inspect);
            fs_time += out.fs_time;
            train_time += out.train_time;
            validate_time += out.validate_time;
            diagnostic = diagnostic.or(out.diagnostic.clone());
            match out.status {
                EvalStatus::FsTimeout | EvalStatus::DegenerateFs => {
                    fs_fail = Some((out.status, out.fs));
                    break;
                }
                EvalStatus::TrainTimeout => status = EvalStatus::TrainTimeout,
                EvalStatus::PartialModel if status == EvalStatus::Complete => status = EvalStatus::PartialModel,
                _ => {}
            }
            folds.push(out.error);
        }
        let mut cached = None;
        let raw = if let Some((st, fs)) = fs_fail {
            status = st;
            let block = c.fs_block().expect("feature selection ran");
            let cause = match (st, fs) {
                (EvalStatus::FsTimeout, _) => CacheCause::Timeout,
                (_, Some(FsStatus::All)) => CacheCause::AllSelected,
                _ => CacheCause::NoneSelected,
            };
            let inserted = match cause {
                CacheCause::Timeout if self.cfg.technique(3) => self.timeouts.insert(block, cause),
                CacheCause::AllSelected | CacheCause::NoneSelected if self.cfg.technique(5) => {
                    self.degenerate.insert(block, cause)
                }
                _ => false,
            };
            cached = inserted.then_some(cause);
            1.0
        } else {
            folds.iter().sum::<f64>() / folds.len() as f64
        };
        let adjusted = self.adjusted(c, raw);
        let cost = fs_time + train_time + validate_time;
        self.cost += cost;
        self.counters.cost += cost;
        self.counters.evaluations += 1;
        self.evaluations += 1;
        self.distinct.insert(c.key());
        self.trace.push(TraceRecord::Eval {
            round,
            algorithm: self.algs[a].id().into(),
            step,
            combination: c.values.clone(),
            status,
            raw_error: raw,
            adjusted_error: adjusted,
            fold_errors: folds,
            fs_time,
            train_time,
            validate_time,
            provenance: Provenance::Tested,
            cached,
            diagnostic,
        });
        self.algs[a].upsert_point(DataPoint { combination: c.clone(), error: adjusted, provenance: Provenance::Tested });
        Tested { raw, status }
    }

    /// Draws candidates from `next` and tests them until `q` non-degenerate
    /// tests or `cap` tests have been made. Skips do not count as tests;
    /// `skip_limit` consecutive skips end the loop.
    fn trial_loop(
        &mut self,
        a: usize,
        round: usize,
        q: usize,
        cap: usize,
        step: Step,
        next: &mut dyn FnMut(&mut Search<'a>, usize) -> Option<(Combination, Source)>,
    ) -> usize {
        let (mut successes, mut trials, mut skips) = (0, 0, 0);
        while successes < q && trials < cap {
            if self.over_budget() {
                self.truncated = true;
                break;
            }
            let Some((c, source)) = next(self, a) else { break };
            self.trace.push(TraceRecord::Propose {
                round,
                algorithm: self.algs[a].id().into(),
                source,
                combination: c.values.clone(),
            });
            self.algs[a].round_seen.push(c.clone());
            if let Some(skip) = self.gate(&c) {
                self.record_skip(a, &c, round, step, skip);
                skips += 1;
                if skips >= self.cfg.skip_limit {
                    break;
                }
                continue;
            }
            skips = 0;
            let t = self.test(a, &c, round, step);
            trials += 1;
            self.algs[a].set_estimate(c, t.raw);
            if t.status != EvalStatus::DegenerateFs {
                successes += 1;
            }
        }
        successes
    }

    /// Default combination, then random ones not yet seen this round.
    fn screen(&mut self, a: usize) {
        let id = self.algs[a].id();
        let mut r = rng::stream(self.cfg.seed, &[1, stable_hash("screen"), stable_hash(id)]);
        let mut first = true;
        let redraws = self.cfg.skip_limit;
        let mut next = move |s: &mut Search<'a>, a: usize| -> Option<(Combination, Source)> {
            let st = &s.algs[a];
            if first {
                first = false;
                return Some((Combination::new(st.id(), st.space.default_values()), Source::Default));
            }
            (0..=redraws)
                .map(|_| random_combination(st.id(), &st.space, &mut r))
                .find(|c| !st.is_duplicate(c))
                .map(|c| (c, Source::Random))
        };
        let q = self.cfg.random_first_round + 1;
        self.trial_loop(a, 1, q, self.cfg.trial_cap_first, Step::Screen, &mut next);
    }

    /// Removes unpromising algorithms from `pool`; returns the kept ones in
    /// registry order.
    #[allow(clippy::too_many_arguments)]
    fn prune(&mut self, round: usize, stage: &str, pool: &[usize], best: f64, keep: f64, floor: usize) -> Vec<usize> {
        let tau = self.schedule[round - 1].tau.unwrap_or(1.0);
        let protect = round <= 2;
        let mut ranked: Vec<usize> = pool.to_vec();
        ranked.sort_by(|&x, &y| self.algs[x].min_error().total_cmp(&self.algs[y].min_error()).then(x.cmp(&y)));
        let limit = schedule::normalize(best + tau);
        let mut reason: BTreeMap<usize, &str> = BTreeMap::new();
        let mut kept: Vec<usize> = Vec::new();
        for &a in &ranked {
            if schedule::normalize(self.algs[a].min_error()) >= limit {
                reason.insert(a, "tau");
            } else {
                kept.push(a);
            }
        }
        let cap = schedule::keep_count(keep, pool.len());
        for &a in kept.iter().skip(cap) {
            reason.insert(a, "keep");
        }
        kept.truncate(cap);
        for &a in &ranked {
            if kept.len() >= floor {
                break;
            }
            if !kept.contains(&a) {
                reason.remove(&a);
                kept.push(a);
            }
        }
        if protect {
            for &a in &ranked {
                if self.algs[a].entry.protected && !kept.contains(&a) {
                    reason.remove(&a);
                    kept.push(a);
                }
            }
        }
        kept.sort_unstable();
        let entries = ranked
            .iter()
            .map(|&a| trace::PruneEntry {
                algorithm: self.algs[a].id().into(),
                min_error: self.algs[a].min_error(),
                removed: reason.get(&a).map(|r| r.to_string()),
            })
            .collect();
        self.trace.push(TraceRecord::Prune { round, stage: stage.into(), tau, best, entries });
        kept
    }

    fn round_one(&mut self) {
        let all: Vec<usize> = (0..self.algs.len()).collect();
        self.begin_round(1, &all);
        let keep = self.cfg.keep_first;
        let bases: Vec<usize> = all.iter().copied().filter(|&a| self.algs[a].entry.kind == AlgoKind::Base).collect();
        for &a in &bases {
            if self.truncated {
                break;
            }
            self.screen(a);
        }
        let mut survivors = Vec::new();
        if !bases.is_empty() {
            let best = bases.iter().map(|&a| self.algs[a].min_error()).fold(1.0, f64::min);
            let floor = bases.len().min(self.cfg.min_survivors);
            survivors = self.prune(1, "base", &bases, best, keep, floor);
        }
        let allowed: Vec<String> = self.ids(&survivors);
        let mut composite = Vec::new();
        let others: Vec<usize> = all.iter().copied().filter(|&a| self.algs[a].entry.kind != AlgoKind::Base).collect();
        for a in others {
            match restricted_space(self.algs[a].entry, &allowed) {
                Some(space) => {
                    self.algs[a].space = space;
                    composite.push(a);
                }
                None => self.trace.push(TraceRecord::Prune {
                    round: 1,
                    stage: "composite".into(),
                    tau: self.schedule[0].tau.unwrap_or(1.0),
                    best: 1.0,
                    entries: vec![trace::PruneEntry {
                        algorithm: self.algs[a].id().into(),
                        min_error: 1.0,
                        removed: Some("no surviving base algorithm".into()),
                    }],
                }),
            }
        }
        for &a in &composite {
            if self.truncated {
                break;
            }
            self.screen(a);
        }
        if !composite.is_empty() {
            let best = survivors
                .iter()
                .chain(&composite)
                .map(|&a| self.algs[a].min_error())
                .fold(1.0, f64::min);
            let floor = if survivors.is_empty() { composite.len().min(self.cfg.min_survivors) } else { 0 };
            survivors.extend(self.prune(1, "composite", &composite, best, keep, floor));
        }
        survivors.sort_unstable();
        self.survivors = survivors;
        if self.cfg.technique(5) || self.cfg.technique(3) {
            self.inject_cache_points();
        }
        self.end_round();
    }

    fn inject_cache_points(&mut self) {
        let mut entries: Vec<_> = Vec::new();
        if self.cfg.technique(3) {
            entries.extend(self.timeouts.entries().iter().cloned());
        }
        if self.cfg.technique(5) {
            entries.extend(self.degenerate.entries().iter().cloned());
        }
        for &a in &self.survivors.clone() {
            if self.algs[a].space.param(FS_USE).is_none() {
                continue;
            }
            let id = self.algs[a].id();
            let mut r = rng::stream(self.cfg.seed, &[1, stable_hash("inject"), stable_hash(id)]);
            for e in &entries {
                let mut values = self.algs[a].space.random_values(&mut r);
                for (k, v) in values.iter_mut() {
                    if k.starts_with(FS_PREFIX) {
                        *v = Value::Inactive;
                    }
                }
                values.insert(FS_USE.into(), Value::Cat("true".into()));
                values.extend(e.block.values.iter().map(|(k, v)| (k.clone(), v.clone())));
                let c = Combination::new(id, values);
                self.trace.push(TraceRecord::Inject {
                    round: 1,
                    algorithm: id.into(),
                    combination: c.values.clone(),
                    raw_error: 1.0,
                    adjusted_error: 1.0,
                    provenance: Provenance::CacheInjected,
                });
                self.algs[a].upsert_point(DataPoint { combination: c, error: 1.0, provenance: Provenance::CacheInjected });
            }
        }
    }

    fn intermediate_round(&mut self, round: usize) {
        let start = self.survivors.clone();
        self.begin_round(round, &start);
        for &a in &start {
            if self.truncated {
                break;
            }
            self.advance_algorithm(a, round);
        }
        let best = start.iter().map(|&a| self.algs[a].min_error()).fold(1.0, f64::min);
        let floor = start.len().min(self.cfg.min_survivors);
        self.survivors = self.prune(round, "pooled", &start, best, self.cfg.keep_later, floor);
        self.end_round();
    }

    /// Retest, rough estimates, then optimization cycles for one algorithm.
    fn advance_algorithm(&mut self, a: usize, round: usize) {
        let prev = std::mem::take(&mut self.algs[a].estimates);
        self.algs[a].round_seen.clear();
        let space = self.algs[a].space.clone();
        let errors: Vec<f64> = prev.iter().map(|e| e.raw).collect();
        let dist = |i: usize, j: usize| space.distance(&prev[i].combination.values, &prev[j].combination.values);
        let t1 = self.cfg.technique(1);
        let selected = select_for_retest(&errors, dist, self.cfg.n_c, self.cfg.t_d, t1);

        let mut ratios = Vec::with_capacity(selected.len());
        for &i in &selected {
            if self.over_budget() {
                self.truncated = true;
                return;
            }
            let c = prev[i].combination.clone();
            self.trace.push(TraceRecord::Propose {
                round,
                algorithm: self.algs[a].id().into(),
                source: Source::Retest,
                combination: c.values.clone(),
            });
            self.algs[a].round_seen.push(c.clone());
            let e2 = match self.gate(&c) {
                Some(skip) => {
                    self.record_skip(a, &c, round, Step::Retest, skip);
                    1.0
                }
                None => self.test(a, &c, round, Step::Retest).raw,
            };
            ratios.push(compute_ratio(prev[i].raw, e2));
            self.algs[a].set_estimate(c, e2);
        }

        for (j, e) in prev.iter().enumerate() {
            if selected.contains(&j) {
                continue;
            }
            let distances: Vec<usize> = selected.iter().map(|&i| dist(j, i)).collect();
            let est = rough_estimate_idw(e.raw, &distances, &ratios, !t1);
            let adjusted = self.adjusted(&e.combination, est);
            self.trace.push(TraceRecord::Inject {
                round,
                algorithm: self.algs[a].id().into(),
                combination: e.combination.values.clone(),
                raw_error: est,
                adjusted_error: adjusted,
                provenance: Provenance::RoughIdw,
            });
            self.algs[a].upsert_point(DataPoint {
                combination: e.combination.clone(),
                error: adjusted,
                provenance: Provenance::RoughIdw,
            });
            self.algs[a].set_estimate(e.combination.clone(), est);
        }

        let cycles = self.schedule[round - 1].cycles.unwrap_or(0);
        let params = ProposalParams {
            count: self.cfg.proposals,
            redraws: self.cfg.skip_limit,
            ..ProposalParams::default()
        };
        let forest_params = ForestParams { trees: self.cfg.surrogate_trees, ..ForestParams::default() };
        for cycle in 0..cycles {
            if self.truncated {
                return;
            }
            let id = self.algs[a].id();
            let seed = rng::derive_seed(self.cfg.seed, &[round as u64, cycle as u64, stable_hash(id)]);
            let forest = surrogate::fit(id, &space, &self.algs[a].points, forest_params, seed);
            let incumbents: Vec<Combination> = self.algs[a]
                .ranked()
                .into_iter()
                .take(params.incumbents)
                .map(|e| e.combination.clone())
                .collect();
            let mut r = rng::stream(seed, &[stable_hash("propose")]);
            let mut queue: VecDeque<(Combination, Source)> = VecDeque::new();
            let space_c = space.clone();
            let mut next = move |s: &mut Search<'a>, a: usize| -> Option<(Combination, Source)> {
                if queue.is_empty() {
                    let batch = surrogate::propose(&forest, &space_c, &incumbents, &s.algs[a].round_seen, &mut r, params);
                    queue.extend(batch.into_iter().enumerate().map(|(i, c)| {
                        (c, if i % 2 == 0 { Source::Guided } else { Source::Random })
                    }));
                }
                queue.pop_front()
            };
            let q = self.cfg.proposals;
            self.trial_loop(a, round, q, q + self.cfg.trial_slack, Step::Optimize, &mut next);
        }
    }

    fn final_round(&mut self) -> Option<(Combination, f64, Option<f64>, &'static str)> {
        let survivors = self.survivors.clone();
        self.begin_round(ROUNDS, &survivors);
        if !self.cfg.technique(4) {
            let pick = self.lowest_estimate(&survivors);
            self.end_round();
            return pick.map(|(c, e)| (c, e, None, "lowest-estimate"));
        }
        let h = self.cfg.h.unwrap_or(if self.size.is_large() { 3 } else { 10 });
        let sample = final_cv_sample(self.d, &self.plan, self.cfg.seed);
        let mut r = rng::stream(self.cfg.seed, &[ROUNDS as u64, stable_hash("final-folds")]);
        let parts = stratified_parts(self.d, &sample, h.min(sample.len()).max(2), &mut r);

        let mut candidates: Vec<(usize, Combination, f64)> = Vec::new();
        for &a in &survivors {
            for e in self.algs[a].ranked().into_iter().filter(|e| e.raw < 1.0).take(self.cfg.final_top) {
                candidates.push((a, e.combination.clone(), e.raw));
            }
        }
        if candidates.is_empty() {
            let pick = self.lowest_estimate(&survivors);
            self.end_round();
            return pick.map(|(c, e)| (c, e, None, "fallback"));
        }
        let sched = &self.schedule[ROUNDS - 1];
        let budgets = Budgets { fs: sched.fs_budget, train: sched.train_budget };
        let mut contenders = Vec::with_capacity(candidates.len());
        for (a, c, prev) in &candidates {
            let mut folds = Vec::with_capacity(parts.len());
            let mut time = 0.0;
            let gated = self.gate(c).is_some();
            for (f, val) in parts.iter().enumerate() {
                if gated {
                    folds.push(1.0);
                    continue;
                }
                let train: Vec<usize> = parts
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, p)| p.iter().copied())
                    .collect();
                let mut rr = self.eval_seed(ROUNDS, f, c);
                let out = run_test(self.d, c, &train, val, budgets, &self.clock, &mut rr, self.cfg.technique(5));
                time += out.fs_time + out.train_time + out.validate_time;
                folds.push(out.error);
            }
            if !gated {
                self.distinct.insert(c.key());
                self.evaluations += 1;
                self.counters.evaluations += 1;
            } else {
                self.counters.skips += 1;
            }
            self.cost += time;
            self.counters.cost += time;
            let _ = a;
            contenders.push(tournament::Contender { fold_errors: folds, prev_estimate: *prev, time });
        }
        let wins = tournament::pairwise_wins(&contenders);
        for ((a, c, prev), (ct, w)) in candidates.iter().zip(contenders.iter().zip(&wins)) {
            self.trace.push(TraceRecord::FinalCv {
                round: ROUNDS,
                algorithm: self.algs[*a].id().into(),
                combination: c.values.clone(),
                fold_errors: ct.fold_errors.clone(),
                mean_error: ct.mean(),
                prev_estimate: *prev,
                time: ct.time,
                wins: *w,
            });
        }
        let best = tournament::champion(&contenders).expect("candidates are non-empty");
        self.end_round();
        let (_, c, prev) = candidates.swap_remove(best);
        Some((c, prev, Some(contenders[best].mean()), "tournament"))
    }

    fn lowest_estimate(&self, pool: &[usize]) -> Option<(Combination, f64)> {
        pool.iter()
            .filter_map(|&a| self.algs[a].ranked().first().map(|e| (e.combination.clone(), e.raw)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
    }

    fn finish(mut self) -> Result<SearchOutcome> {
        let picked = if self.truncated {
            let survivors = self.survivors.clone();
            let all: Vec<usize> = (0..self.algs.len()).collect();
            self.lowest_estimate(&survivors)
                .or_else(|| self.lowest_estimate(&all))
                .map(|(c, e)| (c, e, None, "lowest-estimate"))
        } else {
            self.final_round()
        };
        let (combination, prev_estimate, cv_mean, method) = match picked {
            Some(p) => p,
            None => {
                let a = self.survivors.first().copied().unwrap_or(0);
                let st = &self.algs[a];
                (Combination::new(st.id(), st.space.default_values()), 1.0, None, "fallback")
            }
        };
        let mut r = rng::stream(self.cfg.seed, &[ROUNDS as u64 + 1, stable_hash(&combination.key())]);
        let (columns, fit) = fit_final(self.d, &combination, &mut r)
            .map_err(|e| Error::Search(format!("final model for `{}` failed: {e}", combination.algorithm)))?;
        let uses_fs = combination.uses_fs();
        self.trace.push(TraceRecord::Champion {
            round: ROUNDS,
            algorithm: combination.algorithm.clone(),
            combination: combination.values.clone(),
            method: method.into(),
            prev_estimate,
            cv_mean,
            uses_fs,
            partial: fit.partial,
        });
        let champion = ChampionSummary {
            algorithm: combination.algorithm.clone(),
            family: registry::family(&combination).into(),
            combination: combination.clone(),
            method: method.into(),
            prev_estimate,
            cv_mean,
            uses_fs,
            features_used: columns.len(),
            partial: fit.partial,
        };
        let model = TrainedModel::new(self.d, combination, columns, fit);
        let report = SearchReport {
            format: REPORT_FORMAT.into(),
            dataset: DatasetSummary {
                name: self.d.name().into(),
                target: self.d.target_name().into(),
                n: self.d.n(),
                p: self.d.p(),
                n_classes: self.d.n_classes(),
                size: self.size.tag,
            },
            seed: self.cfg.seed,
            clock: self.clock.mode,
            champion,
            schedule: self.schedule.clone(),
            rounds: self.rounds.clone(),
            distinct_combinations: self.distinct.len(),
            evaluations: self.evaluations,
            cache_entries: self.timeouts.len() + self.degenerate.len(),
            total_cost: self.cost,
            truncated: self.truncated,
            provenance: ReportProvenance {
                overrides: self.cfg.overrides(),
                techniques_off: {
                    let mut t = self.cfg.technique_off.clone();
                    t.sort_unstable();
                    t.dedup();
                    t
                },
            },
        };
        Ok(SearchOutcome { report, model, trace: self.trace })
    }
}
