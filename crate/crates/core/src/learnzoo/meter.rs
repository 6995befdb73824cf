//! Time accounting for budgeted feature selection and training.
//!
//! In virtual mode every learner charges an operation count and the meter
//! converts it to cost units, which makes budgets and timeouts reproducible.
//! In wall mode one unit is one second of elapsed time.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Wall,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub mode: ClockMode,
    /// Operations per cost unit in virtual mode.
    pub ops_per_unit: f64,
}

pub const DEFAULT_OPS_PER_UNIT: f64 = 100_000.0;

impl Default for Clock {
    fn default() -> Self {
        Clock {
            mode: ClockMode::Virtual,
            ops_per_unit: DEFAULT_OPS_PER_UNIT,
        }
    }
}

impl Clock {
    pub fn virtual_clock(ops_per_unit: f64) -> Self {
        Clock {
            mode: ClockMode::Virtual,
            ops_per_unit,
        }
    }

    pub fn wall() -> Self {
        Clock {
            mode: ClockMode::Wall,
            ops_per_unit: DEFAULT_OPS_PER_UNIT,
        }
    }

    pub fn meter(&self, limit: f64) -> Meter {
        Meter {
            clock: *self,
            limit,
            ops: 0,
            start: Instant::now(),
        }
    }

    pub fn unlimited(&self) -> Meter {
        self.meter(f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct Meter {
    clock: Clock,
    limit: f64,
    ops: u64,
    start: Instant,
}

/// Why training or feature selection stopped without a usable result.
#[derive(Debug, Clone, PartialEq)]
pub enum Abort {
    Budget,
    Failure(String),
}

impl std::fmt::Display for Abort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Abort::Budget => f.write_str("budget exhausted"),
            Abort::Failure(m) => f.write_str(m),
        }
    }
}

impl Meter {
    pub fn charge(&mut self, ops: u64) {
        self.ops = self.ops.saturating_add(ops);
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    /// Cost units spent so far.
    pub fn spent(&self) -> f64 {
        match self.clock.mode {
            ClockMode::Virtual => self.ops as f64 / self.clock.ops_per_unit,
            ClockMode::Wall => self.start.elapsed().as_secs_f64(),
        }
    }

    pub fn exhausted(&self) -> bool {
        self.spent() >= self.limit
    }

    /// `Err(Budget)` once the limit is reached.
    pub fn check(&self) -> Result<(), Abort> {
        if self.exhausted() {
            Err(Abort::Budget)
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_is_exhausted_before_any_work() {
        let m = Clock::virtual_clock(10.0).meter(0.0);
        assert!(m.exhausted());
        assert_eq!(m.check(), Err(Abort::Budget));
    }

    #[test]
    fn virtual_units() {
        let mut m = Clock::virtual_clock(100.0).meter(2.0);
        m.charge(150);
        assert_eq!(m.spent(), 1.5);
        assert!(!m.exhausted());
        m.charge(50);
        assert!(m.exhausted());
    }
}
