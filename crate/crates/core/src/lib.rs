//! Progressive-sampling Bayesian optimization for picking a classification
//! algorithm, an optional feature-selection technique, and their
//! hyper-parameter values in one search.
//!
//! The search runs five rounds. Rounds one to four train on nested,
//! doubling samples of a working set and prune algorithms between rounds;
//! the final round runs a cross-validated pairwise tournament over the best
//! surviving combinations and retrains the winner on the whole dataset.
//!
//! ```no_run
//! use psbo::{config::SearchConfig, dataset::{load_dataset, Format, LoadOptions}, engine::run_search};
//!
//! let data = load_dataset("car.csv", Format::Csv, "class", &LoadOptions::default()).unwrap();
//! let outcome = run_search(&data, &SearchConfig::default()).unwrap();
//! println!("{}", outcome.report.champion.algorithm);
//! ```

pub mod bench;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod hyperspace;
pub mod learnzoo;
pub mod rng;
pub mod surrogate;
pub mod synth;

pub use error::{Error, Result};
