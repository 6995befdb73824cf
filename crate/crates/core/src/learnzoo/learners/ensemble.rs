use serde::{Deserialize, Serialize};

use crate::learnzoo::meter::{Abort, Meter};
use crate::learnzoo::model::{fit_algorithm, Model};
use crate::learnzoo::params::Params;
use crate::learnzoo::registry;
use crate::learnzoo::table::Table;
use crate::learnzoo::Fit;
use crate::rng::Rng;

pub const SLOTS: [&str; 3] = ["slot1", "slot2", "slot3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteModel {
    members: Vec<Model>,
    n_classes: usize,
}

impl VoteModel {
    /// Plurality vote; ties go to the earliest member whose prediction is
    /// among the tied classes.
    pub fn predict(&self, x: &[f64]) -> usize {
        let preds: Vec<usize> = self.members.iter().map(|m| m.predict(x)).collect();
        let mut votes = vec![0usize; self.n_classes];
        for &c in &preds {
            votes[c] += 1;
        }
        let top = votes.iter().copied().max().unwrap_or(0);
        preds.into_iter().find(|&c| votes[c] == top).unwrap_or(0)
    }

    pub fn predict_ops(&self) -> u64 {
        self.members.iter().map(Model::predict_ops).sum::<u64>().max(1)
    }
}

/// Base ids of the active slots, in slot order.
pub fn slot_ids(p: &Params) -> Vec<String> {
    SLOTS.iter().filter_map(|s| p.cat(s).ok().map(str::to_string)).collect()
}

/// Not anytime: every member is trained at its base algorithm's default
/// combination, and the ensemble is abandoned if any member cannot be.
pub fn train(t: &Table, p: &Params, rng: &mut Rng, meter: &mut Meter) -> Result<Fit<VoteModel>, Abort> {
    meter.check()?;
    let mut members = Vec::new();
    let mut partial = false;
    for id in slot_ids(p) {
        meter.check()?;
        let defaults = registry::entry(&id)
            .ok_or_else(|| Abort::Failure(format!("unknown base algorithm `{id}`")))?
            .space
            .default_values();
        let fit = fit_algorithm(&id, t, &defaults, "", rng, meter)?;
        partial |= fit.partial;
        members.push(fit.model);
    }
    if members.len() < 2 {
        return Err(Abort::Failure("a vote needs at least two members".into()));
    }
    Ok(Fit {
        model: VoteModel { members, n_classes: t.n_classes },
        partial,
    })
}
