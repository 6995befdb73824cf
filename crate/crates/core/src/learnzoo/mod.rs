//! Classification learners, feature-selection techniques, and the budgeted
//! test that runs one combination on one fold.

pub mod features;
pub mod learners;
pub mod meter;
pub mod model;
pub mod params;
pub mod registry;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::hyperspace::Combination;
use crate::rng::Rng;
use features::{run_feature_selection, FsStatus};
use meter::{Abort, Clock, Meter};
use model::{evaluate_error, fit_algorithm, Model};
use table::Table;

pub use registry::{entry, registry, AlgoKind, AlgorithmEntry};

/// A trained model, possibly cut short by the budget.
#[derive(Debug, Clone)]
pub struct Fit<M> {
    pub model: M,
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalStatus {
    Complete,
    PartialModel,
    FsTimeout,
    TrainTimeout,
    DegenerateFs,
    CacheSkip,
    RuleSkip,
}

impl EvalStatus {
    /// Statuses whose raw error is fixed at 1.0.
    pub fn is_failure(self) -> bool {
        !matches!(self, EvalStatus::Complete | EvalStatus::PartialModel)
    }
}

/// Per-test limits, in cost units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub fs: f64,
    pub train: f64,
}

/// Outcome of testing one combination on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub status: EvalStatus,
    pub error: f64,
    pub fs_time: f64,
    pub train_time: f64,
    pub validate_time: f64,
    /// Outcome of feature selection, when the combination uses it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs: Option<FsStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl FoldOutcome {
    fn failed(status: EvalStatus, fs: Option<FsStatus>, fs_time: f64, train_time: f64, diagnostic: Option<String>) -> FoldOutcome {
        FoldOutcome {
            status,
            error: 1.0,
            fs_time,
            train_time,
            validate_time: 0.0,
            fs,
            diagnostic,
        }
    }

    pub fn cost(&self) -> f64 {
        self.fs_time + self.train_time + self.validate_time
    }
}

/// Trains `c` on the given rows and feature columns.
pub fn train_model(
    c: &Combination,
    d: &Dataset,
    rows: &[usize],
    cols: &[usize],
    rng: &mut Rng,
    meter: &mut Meter,
) -> Result<Fit<Model>, Abort> {
    if cols.is_empty() {
        return Err(Abort::Failure("no features to train on".into()));
    }
    let t = Table::from_dataset(d, rows, cols);
    fit_algorithm(&c.algorithm, &t, &c.values, "", rng, meter)
}

/// Runs feature selection (if the combination uses it), trains under the
/// budgets, and measures the validation error.
///
/// Failures never propagate: a feature-selection timeout or learner failure
/// yields raw error 1.0 with the matching status. With `inspect` off, an
/// all-features result trains on every feature and an empty one trains the
/// majority-class baseline instead of being reported as degenerate.
#[allow(clippy::too_many_arguments)]
pub fn run_test(
    d: &Dataset,
    c: &Combination,
    train_rows: &[usize],
    val_rows: &[usize],
    budgets: Budgets,
    clock: &Clock,
    rng: &mut Rng,
    inspect: bool,
) -> FoldOutcome {
    let all: Vec<usize> = (0..d.p()).collect();
    let mut fs_time = 0.0;
    let mut fs = None;
    let mut baseline = false;
    let cols = match c.fs_block() {
        Some(block) => {
            let t = Table::from_dataset(d, train_rows, &all);
            let mut meter = clock.meter(budgets.fs);
            let out = run_feature_selection(&block, &t, &mut meter);
            fs_time = out.elapsed;
            fs = Some(out.status.clone());
            match out.status {
                FsStatus::Timeout => {
                    return FoldOutcome::failed(EvalStatus::FsTimeout, fs, fs_time, 0.0, out.diagnostic)
                }
                FsStatus::All | FsStatus::None if inspect => {
                    return FoldOutcome::failed(EvalStatus::DegenerateFs, fs, fs_time, 0.0, None)
                }
                FsStatus::All => all,
                FsStatus::None => {
                    baseline = true;
                    all
                }
                FsStatus::Selected(s) => s,
            }
        }
        None => all,
    };
    let mut meter = clock.meter(budgets.train);
    let fit = if baseline {
        let zero = Combination::new("zero_r", Default::default());
        train_model(&zero, d, train_rows, &cols, rng, &mut meter)
    } else {
        train_model(c, d, train_rows, &cols, rng, &mut meter)
    };
    let train_time = meter.spent();
    let fit = match fit {
        Ok(f) => f,
        Err(Abort::Budget) => return FoldOutcome::failed(EvalStatus::TrainTimeout, fs, fs_time, train_time, None),
        Err(Abort::Failure(m)) => {
            return FoldOutcome::failed(EvalStatus::TrainTimeout, fs, fs_time, train_time, Some(m))
        }
    };
    let val = Table::from_dataset(d, val_rows, &cols);
    let mut vm = clock.unlimited();
    let error = evaluate_error(&fit.model, &val, &mut vm);
    FoldOutcome {
        status: if fit.partial { EvalStatus::PartialModel } else { EvalStatus::Complete },
        error,
        fs_time,
        train_time,
        validate_time: vm.spent(),
        fs,
        diagnostic: None,
    }
}

/// Trains `c` on every row of `d` without budgets. Returns the feature
/// columns used and the model. A degenerate or failed feature selection
/// falls back to all features.
pub fn fit_final(d: &Dataset, c: &Combination, rng: &mut Rng) -> Result<(Vec<usize>, Fit<Model>), Abort> {
    let rows: Vec<usize> = (0..d.n()).collect();
    let all: Vec<usize> = (0..d.p()).collect();
    let clock = Clock::default();
    let cols = match c.fs_block() {
        Some(block) => {
            let t = Table::from_dataset(d, &rows, &all);
            match run_feature_selection(&block, &t, &mut clock.unlimited()).status {
                FsStatus::Selected(s) => s,
                _ => all,
            }
        }
        None => all,
    };
    let fit = train_model(c, d, &rows, &cols, rng, &mut clock.unlimited())?;
    Ok((cols, fit))
}
