//! Search configuration. Every field has a default; a TOML file may set any
//! subset of them and command-line flags override the file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learnzoo::meter::{Clock, ClockMode, DEFAULT_OPS_PER_UNIT};

/// Number of switchable techniques.
pub const TECHNIQUES: u8 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    /// Column names to read as categorical even when they parse as numbers.
    pub categorical: Vec<String>,
    pub out: Option<PathBuf>,

    pub seed: u64,
    pub clock: ClockMode,
    pub ops_per_unit: f64,
    /// Total cost allowed for the whole search, checked between tests.
    pub budget: Option<f64>,
    /// Restricts the search to these algorithm ids.
    pub algorithms: Option<Vec<String>>,

    pub n_c: usize,
    pub t_d: usize,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub surrogate_trees: usize,
    pub fs_penalty: f64,
    pub base_penalty: f64,
    pub tau: f64,
    pub tau_decay: f64,
    pub keep_first: f64,
    pub keep_later: f64,
    pub min_survivors: usize,
    pub random_first_round: usize,
    pub trial_cap_first: usize,
    pub trial_slack: usize,
    pub proposals: usize,
    pub cycles: usize,
    pub budget_small: f64,
    pub budget_large: f64,
    pub budget_growth: f64,
    pub fixed_fs_budget: f64,
    pub fixed_train_budget: f64,
    pub final_top: usize,
    pub skip_limit: usize,
    /// Techniques (1..=8) switched off.
    pub technique_off: Vec<u8>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            data: None,
            target: None,
            categorical: Vec::new(),
            out: None,
            seed: 0,
            clock: ClockMode::Virtual,
            ops_per_unit: DEFAULT_OPS_PER_UNIT,
            budget: None,
            algorithms: None,
            n_c: 10,
            t_d: 2,
            k: None,
            h: None,
            surrogate_trees: 10,
            fs_penalty: 1.1,
            base_penalty: 0.02,
            tau: 0.5,
            tau_decay: 0.8,
            keep_first: 0.4,
            keep_later: 0.7,
            min_survivors: 3,
            random_first_round: 20,
            trial_cap_first: 200,
            trial_slack: 5,
            proposals: 10,
            cycles: 3,
            budget_small: 10.0,
            budget_large: 20.0,
            budget_growth: 1.5,
            fixed_fs_budget: 900.0,
            fixed_train_budget: 9000.0,
            final_top: 10,
            skip_limit: 50,
            technique_off: Vec::new(),
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

impl SearchConfig {
    pub fn from_toml(text: &str) -> Result<SearchConfig> {
        let cfg: SearchConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<SearchConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SearchConfig::from_toml(&text)
    }

    pub fn technique(&self, t: u8) -> bool {
        !self.technique_off.contains(&t)
    }

    pub fn clock(&self) -> Clock {
        match self.clock {
            ClockMode::Virtual => Clock::virtual_clock(self.ops_per_unit),
            ClockMode::Wall => Clock::wall(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        check(self.ops_per_unit > 0.0 && self.ops_per_unit.is_finite(), "ops_per_unit must be positive")?;
        check(self.budget.map_or(true, |b| b > 0.0), "budget must be positive")?;
        check(self.n_c >= 1, "n_c must be at least 1")?;
        check(self.k.map_or(true, |k| (1..=10).contains(&k)), "k must be between 1 and 10")?;
        check(self.h.map_or(true, |h| (2..=20).contains(&h)), "h must be between 2 and 20")?;
        check(self.surrogate_trees >= 1, "surrogate_trees must be at least 1")?;
        check(self.fs_penalty >= 1.0, "fs_penalty must be at least 1")?;
        check(self.base_penalty >= 0.0, "base_penalty must be non-negative")?;
        check(unit(self.tau), "tau must be in (0, 1]")?;
        check(unit(self.tau_decay), "tau_decay must be in (0, 1]")?;
        check(unit(self.keep_first) && unit(self.keep_later), "keep fractions must be in (0, 1]")?;
        check(self.min_survivors >= 1, "min_survivors must be at least 1")?;
        check(self.trial_cap_first >= 1, "trial_cap_first must be at least 1")?;
        check(self.proposals >= 2 && self.proposals % 2 == 0, "proposals must be even and at least 2")?;
        check(self.cycles >= 1, "cycles must be at least 1")?;
        check(
            self.budget_small > 0.0 && self.budget_large > 0.0 && self.budget_growth >= 1.0,
            "budgets must be positive and budget_growth at least 1",
        )?;
        check(
            self.fixed_fs_budget > 0.0 && self.fixed_train_budget > 0.0,
            "fixed budgets must be positive",
        )?;
        check(self.final_top >= 1, "final_top must be at least 1")?;
        check(self.skip_limit >= 1, "skip_limit must be at least 1")?;
        check(
            self.technique_off.iter().all(|t| (1..=TECHNIQUES).contains(t)),
            "technique numbers run from 1 to 8",
        )?;
        if let Some(algs) = &self.algorithms {
            for a in algs {
                if crate::learnzoo::entry(a).is_none() {
                    return Err(Error::UnknownAlgorithm(a.clone()));
                }
            }
        }
        Ok(())
    }

    /// Fields that differ from the defaults, as JSON values.
    pub fn overrides(&self) -> BTreeMap<String, serde_json::Value> {
        let ours = serde_json::to_value(self).unwrap_or_default();
        let base = serde_json::to_value(SearchConfig::default()).unwrap_or_default();
        let mut out = BTreeMap::new();
        if let (Some(a), Some(b)) = (ours.as_object(), base.as_object()) {
            for (k, v) in a {
                if b.get(k) != Some(v) {
                    out.insert(k.clone(), v.clone());
                }
            }
        }
        out
    }
}
